#pragma once

// Width-minimizing aggregation on the optimization split. Every mode yields a
// band that covers all optimization points; calibration shrinks it afterwards.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "utopia/convex.hpp"
#include "utopia/lp.hpp"
#include "utopia/model.hpp"

namespace utopia {

class AggregationInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n x K matrix of clipped candidate values at the rows of `ds`.
inline Eigen::MatrixXd evaluate_matrix(const std::vector<CandidateFunction>& cands, const Dataset& ds) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(cands.size()));
  for (std::size_t j = 0; j < cands.size(); ++j)
    for (std::size_t i = 0; i < ds.size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cands[j](ds.point(i));
  return out;
}

inline Eigen::VectorXd evaluate_vector(const CandidateFunction& f, const Dataset& ds) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) out(static_cast<Eigen::Index>(i)) = f(ds.point(i));
  return out;
}

struct AggregationResult {
  BandModel band;
  double objective = 0.0;      // sum over optimization points of the fitted squared half-width
  double max_violation = 0.0;  // max_i (s_i - fitted width_i)^+
};

namespace aggregate_detail {

inline void check_inputs(const std::vector<CandidateFunction>& widths, const Dataset& opt) {
  if (widths.empty()) throw std::invalid_argument("aggregation: need at least one width candidate");
  for (const auto& f : widths)
    if (f.role() != CandidateRole::width) throw std::invalid_argument("aggregation: width candidate has mean role");
  if (opt.empty()) throw std::invalid_argument("aggregation: empty optimization split");
}

}  // namespace aggregate_detail

/// min sum_i sum_j a_j f_j(x_i)  s.t.  sum_j a_j f_j(x_i) >= (y_i - m(x_i))^2, a >= 0.
inline AggregationResult aggregate_two_step(const std::vector<CandidateFunction>& widths, const CandidateFunction& mean,
                                            const Dataset& opt, double delta = 0.0, const LpOptions& lp_opt = {}) {
  aggregate_detail::check_inputs(widths, opt);
  if (!(delta >= 0.0)) throw std::invalid_argument("aggregate_two_step: delta must be >= 0");
  const Eigen::MatrixXd F = evaluate_matrix(widths, opt);
  Eigen::VectorXd s(F.rows());
  for (std::size_t i = 0; i < opt.size(); ++i) {
    const double r = opt.response(i) - mean(opt.point(i));
    s(static_cast<Eigen::Index>(i)) = r * r;
  }
  if (!s.allFinite()) throw std::invalid_argument("aggregate_two_step: non-finite squared residual");

  const LpProblem lp(F.colwise().sum().transpose(), F, s);
  const LpSolution sol = solve_lp(lp, lp_opt);
  if (sol.status == LpStatus::infeasible)
    throw AggregationInfeasible("aggregate_two_step: no nonnegative combination covers every optimization point");
  if (sol.status != LpStatus::optimal)
    throw AggregationInfeasible(std::string("aggregate_two_step: LP ") + to_string(sol.status));

  AggregationResult res;
  res.band.mean_candidates = {mean};
  res.band.mean_weights = {1.0};
  res.band.width_candidates = widths;
  res.band.width_weights.resize(widths.size());
  // Interior-point iterates may sit a hair below zero.
  for (std::size_t j = 0; j < widths.size(); ++j) res.band.width_weights[j] = std::max(0.0, sol.x(static_cast<Eigen::Index>(j)));
  res.band.delta = delta;
  const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(res.band.width_weights.data(), F.cols());
  const Eigen::VectorXd fitted = F * a;
  res.objective = fitted.sum();
  res.max_violation = std::max(0.0, (s - fitted).maxCoeff());
  return res;
}

/// Joint program over the mean combination beta (free) and width weights a >= 0.
inline AggregationResult aggregate_one_step(const std::vector<CandidateFunction>& widths,
                                            const std::vector<CandidateFunction>& means, const Dataset& opt,
                                            double delta = 0.0, const QcOptions& qc_opt = {}) {
  aggregate_detail::check_inputs(widths, opt);
  if (!(delta >= 0.0)) throw std::invalid_argument("aggregate_one_step: delta must be >= 0");
  QcProgram qc{evaluate_matrix(widths, opt), evaluate_matrix(means, opt), opt.y()};
  const QcResult sol = solve_qc(qc, qc_opt);

  AggregationResult res;
  res.band.mean_candidates = means;
  res.band.mean_weights.assign(sol.beta.data(), sol.beta.data() + sol.beta.size());
  res.band.width_candidates = widths;
  res.band.width_weights.resize(widths.size());
  for (std::size_t j = 0; j < widths.size(); ++j) res.band.width_weights[j] = std::max(0.0, sol.a(static_cast<Eigen::Index>(j)));
  res.band.delta = delta;
  res.objective = sol.objective;
  res.max_violation = sol.max_violation;
  return res;
}

/// Smallest c with c * f(x_i) >= (y_i - m(x_i))^2 on every optimization point.
inline double scale_single(const CandidateFunction& f, const CandidateFunction& mean, const Dataset& opt) {
  double c = 0.0;
  for (std::size_t i = 0; i < opt.size(); ++i) {
    const double r = opt.response(i) - mean(opt.point(i));
    const double s = r * r;
    if (s == 0.0) continue;
    const double v = f(opt.point(i));
    if (!(v > 0.0)) throw AggregationInfeasible("scale_single: candidate vanishes at a point with nonzero residual");
    c = std::max(c, s / v);
  }
  return c;
}

//------------------------------------------------------------------------------
// Asymmetric bands

/// [sum_k u_k g_k(x), sum_k w_k h_k(x)] with free coefficients.
struct AsymmetricBand {
  std::vector<CandidateFunction> lower_candidates;
  std::vector<double> lower_weights;
  std::vector<CandidateFunction> upper_candidates;
  std::vector<double> upper_weights;

  double lower(Point x) const {
    double v = 0.0;
    for (std::size_t k = 0; k < lower_weights.size(); ++k) v += lower_weights[k] * lower_candidates[k](x);
    return v;
  }
  double upper(Point x) const {
    double v = 0.0;
    for (std::size_t k = 0; k < upper_weights.size(); ++k) v += upper_weights[k] * upper_candidates[k](x);
    return v;
  }
};

inline PredictionInterval predict_interval(const AsymmetricBand& b, Point x) {
  const double l = b.lower(x);
  const double u = b.upper(x);
  return {std::min(l, u), std::max(l, u)};
}

struct AsymmetricResult {
  AsymmetricBand band;
  double objective = 0.0;  // sum_i (upper_i - lower_i)
};

/// min sum_i (upper(x_i) - lower(x_i))  s.t.  lower(x_i) <= y_i <= upper(x_i).
inline AsymmetricResult aggregate_asymmetric(const std::vector<CandidateFunction>& lower_span,
                                             const std::vector<CandidateFunction>& upper_span, const Dataset& opt,
                                             const LpOptions& lp_opt = {}) {
  if (lower_span.empty() || upper_span.empty()) throw std::invalid_argument("aggregate_asymmetric: empty span");
  if (opt.empty()) throw std::invalid_argument("aggregate_asymmetric: empty optimization split");
  const Eigen::MatrixXd G = evaluate_matrix(lower_span, opt);
  const Eigen::MatrixXd H = evaluate_matrix(upper_span, opt);
  const Eigen::Index n = G.rows(), kl = G.cols(), ku = H.cols();

  // Variables (u, w); rows -G u >= -y and H w >= y.
  Eigen::VectorXd c(kl + ku);
  c.head(kl) = -G.colwise().sum().transpose();
  c.tail(ku) = H.colwise().sum().transpose();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, kl + ku);
  A.topLeftCorner(n, kl) = -G;
  A.bottomRightCorner(n, ku) = H;
  Eigen::VectorXd b(2 * n);
  b.head(n) = -opt.y();
  b.tail(n) = opt.y();
  LpProblem lp(std::move(c), std::move(A), std::move(b));
  lp.lower.setConstant(-kInf);
  const LpSolution sol = solve_lp(lp, lp_opt);
  if (sol.status != LpStatus::optimal)
    throw AggregationInfeasible(std::string("aggregate_asymmetric: LP ") + to_string(sol.status));

  AsymmetricResult res;
  res.band.lower_candidates = lower_span;
  res.band.upper_candidates = upper_span;
  res.band.lower_weights.assign(sol.x.data(), sol.x.data() + kl);
  res.band.upper_weights.assign(sol.x.data() + kl, sol.x.data() + kl + ku);
  const Eigen::VectorXd lo = G * sol.x.head(kl);
  const Eigen::VectorXd hi = H * sol.x.tail(ku);
  res.objective = (hi - lo).sum();
  return res;
}

}  // namespace utopia
