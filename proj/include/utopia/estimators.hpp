#pragma once

// Candidate learners fitted on the pre-training split.

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "utopia/features.hpp"
#include "utopia/lp.hpp"
#include "utopia/model.hpp"

namespace utopia {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Design matrix of `features` over the rows of `ds`.
inline Eigen::MatrixXd design_matrix(const Dataset& ds, const FeatureMap& features) {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(features.size()));
  std::vector<double> row(features.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    features.apply(ds.point(i), row);
    for (std::size_t k = 0; k < row.size(); ++k) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
  }
  return phi;
}

/// Squared residuals (y_i - m(x_i))^2.
inline Eigen::VectorXd squared_residuals(const Dataset& ds, const CandidateFunction& mean) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double r = ds.response(i) - mean(ds.point(i));
    s(static_cast<Eigen::Index>(i)) = r * r;
  }
  return s;
}

/// Least squares with ridge penalty on polynomial features, via the normal
/// equations (Phi^T Phi + lambda I) theta = Phi^T y.
inline CandidateFunction fit_mean_ridge(const Dataset& pre, int degree, double lambda_reg) {
  if (pre.empty()) throw std::invalid_argument("fit_mean_ridge: empty dataset");
  if (!(lambda_reg >= 0.0)) throw std::invalid_argument("fit_mean_ridge: ridge penalty must be >= 0");
  const auto features = FeatureMap::polynomial(pre.dim(), degree);
  if (features.size() > pre.size() && lambda_reg == 0.0)
    throw FitError("fit_mean_ridge: " + std::to_string(features.size()) + " features exceed " +
                   std::to_string(pre.size()) + " observations; use a ridge penalty > 0");
  const Eigen::MatrixXd phi = design_matrix(pre, features);
  Eigen::MatrixXd gram = phi.transpose() * phi;
  gram.diagonal().array() += lambda_reg;
  const Eigen::VectorXd rhs = phi.transpose() * pre.y();
  Eigen::VectorXd theta;
  if (lambda_reg == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible()) throw FitError("fit_mean_ridge: singular normal matrix; use a ridge penalty > 0");
    theta = lu.solve(rhs);
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw FitError("fit_mean_ridge: normal matrix not positive definite");
    theta = llt.solve(rhs);
  }
  return CandidateFunction(BasisExpansion{features, std::vector<double>(theta.data(), theta.data() + theta.size())},
                           CandidateRole::mean);
}

/// Coefficients minimizing sum_i rho_tau(t_i - phi_i^T theta). Split slacks
/// u+ >= t - Phi theta and u- >= Phi theta - t, both >= 0.
inline Eigen::VectorXd pinball_regression(const Eigen::MatrixXd& phi, const Eigen::VectorXd& target, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("pinball_regression: tau must lie in (0, 1)");
  const Eigen::Index n = phi.rows();
  const Eigen::Index p = phi.cols();
  Eigen::VectorXd c(p + 2 * n);
  c.head(p).setZero();
  c.segment(p, n).setConstant(tau);
  c.tail(n).setConstant(1.0 - tau);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, p + 2 * n);
  Eigen::VectorXd b(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.block(i, 0, 1, p) = phi.row(i);
    a(i, p + i) = 1.0;
    b(i) = target(i);
    a.block(n + i, 0, 1, p) = -phi.row(i);
    a(n + i, p + n + i) = 1.0;
    b(n + i) = -target(i);
  }
  LpProblem lp(std::move(c), std::move(a), std::move(b));
  lp.lower.head(p).setConstant(-kInf);
  const auto sol = solve_lp(lp);
  if (sol.status != LpStatus::optimal)
    throw FitError(std::string("pinball_regression: LP ") + to_string(sol.status));
  return sol.x.head(p);
}

/// tau-quantile surface of the squared residuals on polynomial features.
inline CandidateFunction fit_quantile_candidate(const Dataset& pre, const CandidateFunction& mean, double tau,
                                                int degree) {
  if (pre.empty()) throw std::invalid_argument("fit_quantile_candidate: empty dataset");
  const auto features = FeatureMap::polynomial(pre.dim(), degree);
  const Eigen::VectorXd theta = pinball_regression(design_matrix(pre, features), squared_residuals(pre, mean), tau);
  return CandidateFunction(BasisExpansion{features, std::vector<double>(theta.data(), theta.data() + theta.size())},
                           CandidateRole::width);
}

/// n^(-1/5) times the average per-coordinate standard deviation.
inline double silverman_bandwidth(const Dataset& ds) {
  const auto n = static_cast<double>(ds.size());
  double sd = 0.0;
  for (Eigen::Index j = 0; j < ds.x().cols(); ++j) {
    const double mu = ds.x().col(j).mean();
    const double var = (ds.x().col(j).array() - mu).square().sum() / std::max(1.0, n - 1.0);
    sd += std::sqrt(var);
  }
  sd /= static_cast<double>(ds.dim());
  const double h = std::pow(n, -0.2) * sd;
  return h > 0.0 ? h : 1.0;
}

/// Nadaraya-Watson estimate of E[(Y - m(X))^2 | X = x].
inline CandidateFunction fit_kernel_second_moment(const Dataset& pre, const CandidateFunction& mean, double bandwidth) {
  if (pre.empty()) throw std::invalid_argument("fit_kernel_second_moment: empty dataset");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("fit_kernel_second_moment: bandwidth must be > 0");
  const Eigen::VectorXd s = squared_residuals(pre, mean);
  return CandidateFunction(KernelSmoother{std::make_shared<const RowMatrix>(pre.x()),
                                          std::vector<double>(s.data(), s.data() + s.size()), bandwidth},
                           CandidateRole::width);
}

inline CandidateFunction constant_candidate(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("constant_candidate: c must be finite and >= 0");
  return make_constant(c, CandidateRole::width);
}

//------------------------------------------------------------------------------
// Candidate menu

struct QuantileSpec {
  double tau = 0.5;
  int degree = 4;
  friend bool operator==(const QuantileSpec&, const QuantileSpec&) = default;
};
struct KernelSecondMomentSpec {
  std::optional<double> bandwidth;  // Silverman rule when unset
  friend bool operator==(const KernelSecondMomentSpec&, const KernelSecondMomentSpec&) = default;
};
struct ConstantSpec {
  double c = 1.0;
  friend bool operator==(const ConstantSpec&, const ConstantSpec&) = default;
};
struct RidgeMeanSpec {
  int degree = 4;
  double lambda = 1e-6;
  friend bool operator==(const RidgeMeanSpec&, const RidgeMeanSpec&) = default;
};

using EstimatorSpec = std::variant<QuantileSpec, KernelSecondMomentSpec, ConstantSpec, RidgeMeanSpec>;

inline void validate_spec(const EstimatorSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, QuantileSpec>) {
          if (!(s.tau > 0.0 && s.tau < 1.0)) throw std::invalid_argument("quantile tau must lie in (0, 1)");
          if (s.degree < 0) throw std::invalid_argument("quantile degree must be >= 0");
        } else if constexpr (std::is_same_v<T, KernelSecondMomentSpec>) {
          if (s.bandwidth && !(*s.bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be > 0");
        } else if constexpr (std::is_same_v<T, ConstantSpec>) {
          if (!(s.c >= 0.0)) throw std::invalid_argument("constant c must be >= 0");
        } else {
          if (s.degree < 0) throw std::invalid_argument("ridge degree must be >= 0");
          if (!(s.lambda >= 0.0)) throw std::invalid_argument("ridge lambda must be >= 0");
        }
      },
      spec);
}

/// Four quantile surfaces (0.6, 0.7, 0.8, 0.9; degree 4), one kernel
/// second-moment smoother and the constant 1.
inline std::vector<EstimatorSpec> default_width_menu() {
  return {QuantileSpec{0.6, 4}, QuantileSpec{0.7, 4}, QuantileSpec{0.8, 4}, QuantileSpec{0.9, 4},
          KernelSecondMomentSpec{}, ConstantSpec{1.0}};
}

inline CandidateFunction fit_width_candidate(const EstimatorSpec& spec, const Dataset& pre, const CandidateFunction& mean) {
  validate_spec(spec);
  return std::visit(
      [&](const auto& s) -> CandidateFunction {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, QuantileSpec>) return fit_quantile_candidate(pre, mean, s.tau, s.degree);
        else if constexpr (std::is_same_v<T, KernelSecondMomentSpec>)
          return fit_kernel_second_moment(pre, mean, s.bandwidth.value_or(silverman_bandwidth(pre)));
        else if constexpr (std::is_same_v<T, ConstantSpec>) return constant_candidate(s.c);
        else throw std::invalid_argument("a ridge-mean spec is not a width candidate");
      },
      spec);
}

}  // namespace utopia
