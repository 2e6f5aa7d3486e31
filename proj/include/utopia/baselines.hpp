#pragma once

// Comparison bands: linear quantile regression, split conformal and the
// kernel semidefinite band.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "utopia/convex.hpp"
#include "utopia/estimators.hpp"
#include "utopia/model.hpp"

namespace utopia {

//------------------------------------------------------------------------------
// Linear quantile regression

/// [q_{alpha/2}(x), q_{1-alpha/2}(x)] from two pinball fits on (1, x).
inline LowerUpperBand fit_lqr(const Dataset& train, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fit_lqr: alpha must lie in (0, 1)");
  if (train.empty()) throw std::invalid_argument("fit_lqr: empty dataset");
  const auto features = FeatureMap::linear(train.dim());
  const Eigen::MatrixXd phi = design_matrix(train, features);
  auto fit = [&](double tau) {
    const Eigen::VectorXd theta = pinball_regression(phi, train.y(), tau);
    return CandidateFunction(BasisExpansion{features, std::vector<double>(theta.data(), theta.data() + theta.size())},
                             CandidateRole::mean);
  };
  return {fit(alpha / 2.0), fit(1.0 - alpha / 2.0)};
}

//------------------------------------------------------------------------------
// Split conformal

/// ceil((1 - alpha)(n + 1))-th smallest score, or +infinity when that rank
/// exceeds n.
inline double conformal_quantile(std::vector<double> scores, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("conformal_quantile: alpha must lie in (0, 1)");
  const std::size_t n = scores.size();
  // The guard keeps products such as 0.75 * 4 = 3.0000000000000004 at rank 3.
  const double raw = (1.0 - alpha) * static_cast<double>(n + 1);
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(raw - 1e-9 * std::max(1.0, raw))));
  if (rank > n) return std::numeric_limits<double>::infinity();
  std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(rank - 1), scores.end());
  return scores[rank - 1];
}

/// Mean fitted on the first half of `ds`, scores |y - m(x)| on the second.
inline ConformalBand fit_split_conformal(const Dataset& ds, double alpha, int mean_degree = 4,
                                         double ridge_lambda = 1e-6) {
  if (ds.size() < 2) throw std::invalid_argument("fit_split_conformal: need at least two observations");
  const std::size_t half = ds.size() / 2;
  std::vector<std::size_t> first(half), second(ds.size() - half);
  for (std::size_t i = 0; i < half; ++i) first[i] = i;
  for (std::size_t i = half; i < ds.size(); ++i) second[i - half] = i;
  const Dataset fit_part = ds.subset(first);
  const Dataset cal_part = ds.subset(second);
  ConformalBand band{fit_mean_ridge(fit_part, mean_degree, ridge_lambda), 0.0};
  std::vector<double> scores(cal_part.size());
  for (std::size_t i = 0; i < cal_part.size(); ++i)
    scores[i] = std::abs(cal_part.response(i) - band.mean(cal_part.point(i)));
  band.q = conformal_quantile(std::move(scores), alpha);
  if (std::isinf(band.q))
    std::clog << "warning: split conformal calibration set of " << cal_part.size()
              << " is too small for alpha = " << alpha << "; returning the whole line\n";
  return band;
}

//------------------------------------------------------------------------------
// Kernel semidefinite band

struct SdpParams {
  std::optional<double> sigma;         // median pairwise distance when unset
  std::optional<double> trace_budget;  // PsdProgram::default_trace_budget when unset
  std::size_t rank = 10;
  double delta = 0.0;
  friend bool operator==(const SdpParams&, const SdpParams&) = default;
};

inline constexpr std::size_t kSdpMaxPoints = 300;

inline double median_pairwise_distance(const RowMatrix& x) {
  std::vector<double> d;
  const auto n = static_cast<std::size_t>(x.rows());
  const auto dim = static_cast<std::size_t>(x.cols());
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d.push_back(std::sqrt(squared_distance(Point(x.data() + i * dim, dim), Point(x.data() + j * dim, dim))));
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

inline Eigen::MatrixXd gaussian_gram(const RowMatrix& x, double sigma) {
  const auto n = x.rows();
  const auto dim = static_cast<std::size_t>(x.cols());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j)
      K(i, j) = K(j, i) = gaussian_kernel(Point(x.data() + i * x.cols(), dim), Point(x.data() + j * x.cols(), dim), sigma);
  }
  return K;
}

/// Uncalibrated band m(x) +/- sqrt(<k_x, B k_x> + delta) covering `opt`.
inline BandModel fit_kernel_sdp(const Dataset& opt, const CandidateFunction& mean, const SdpParams& params,
                                const PsdOptions& psd_opt = {}) {
  if (opt.empty()) throw std::invalid_argument("fit_kernel_sdp: empty optimization split");
  if (opt.size() > kSdpMaxPoints)
    throw std::invalid_argument("fit_kernel_sdp: " + std::to_string(opt.size()) + " points exceed the cap of " +
                                std::to_string(kSdpMaxPoints));
  if (!(params.delta >= 0.0)) throw std::invalid_argument("fit_kernel_sdp: delta must be >= 0");
  if (params.sigma && !(*params.sigma > 0.0)) throw std::invalid_argument("fit_kernel_sdp: sigma must be > 0");
  const double sigma = params.sigma.value_or(median_pairwise_distance(opt.x()));

  PsdProgram prog;
  prog.K = gaussian_gram(opt.x(), sigma);
  prog.s = squared_residuals(opt, mean);
  prog.trace_budget = params.trace_budget.value_or(PsdProgram::default_trace_budget(prog.K, prog.s));
  const std::size_t rank = std::min(params.rank, opt.size());
  const PsdResult res = solve_psd(prog, rank, psd_opt);
  if (res.status == PsdStatus::infeasible)
    throw ConvexSolverError("fit_kernel_sdp: trace budget too small to cover the optimization split", res.max_violation);

  BandModel band;
  band.mean_candidates = {mean};
  band.mean_weights = {1.0};
  band.width_candidates = {CandidateFunction(
      KernelQuadratic{std::make_shared<const RowMatrix>(opt.x()), res.V, sigma}, CandidateRole::width)};
  band.width_weights = {1.0};
  band.delta = params.delta;
  return band;
}

}  // namespace utopia
