#pragma once

// Simulated location-scale designs with known truth.
//
//   setup1  y = xi * sqrt(v(x))
//   setup2  y = 1 + 5x^3 + xi * sqrt(v(x))
//   setup3  y ~ Laplace(x^2 + 5x^4, sqrt(v(x))) truncated to [-2 sqrt(v), 2 sqrt(v)]
//   mvK     setupK applied to t = x^T beta with x uniform on the unit sphere in R^3
//
// with v(x) = 1 + 25x^4 and xi ~ Unif(-1, 1).

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "utopia/features.hpp"
#include "utopia/model.hpp"
#include "utopia/rng.hpp"

namespace utopia {

enum class SetupId { setup1, setup2, setup3, mv1, mv2, mv3 };

inline std::string_view to_string(SetupId id) {
  switch (id) {
    case SetupId::setup1: return "setup1";
    case SetupId::setup2: return "setup2";
    case SetupId::setup3: return "setup3";
    case SetupId::mv1: return "mv1";
    case SetupId::mv2: return "mv2";
    case SetupId::mv3: return "mv3";
  }
  return "?";
}

/// Accepts "setup1".."setup3", "mv1".."mv3" and the bare digits "1".."3".
inline SetupId parse_setup_id(std::string_view s) {
  for (auto id : {SetupId::setup1, SetupId::setup2, SetupId::setup3, SetupId::mv1, SetupId::mv2, SetupId::mv3})
    if (s == to_string(id)) return id;
  if (s == "1") return SetupId::setup1;
  if (s == "2") return SetupId::setup2;
  if (s == "3") return SetupId::setup3;
  throw std::invalid_argument("unknown setup '" + std::string(s) + "' (expected setup1-3 or mv1-3)");
}

struct SetupSpec {
  SetupId id = SetupId::setup1;
  bool laplace_mean_centered = false;  // truncate around the Laplace center instead of zero
  bool laplace_std_scale = false;      // sqrt(v) is the standard deviation, not the scale

  static SetupSpec of(SetupId id) { return SetupSpec{id}; }

  bool multivariate() const { return id == SetupId::mv1 || id == SetupId::mv2 || id == SetupId::mv3; }
  std::size_t dimension() const { return multivariate() ? 3 : 1; }
  /// Univariate design underlying an mv spec.
  int base() const { return static_cast<int>(id) % 3 + 1; }

  static constexpr std::array<double, 3> beta() {
    constexpr double c = 0.57735026918962576451;  // 1/sqrt(3)
    return {c, c, -c};
  }

  friend bool operator==(const SetupSpec&, const SetupSpec&) = default;
};

/// Index the design depends on: x for d = 1, x^T beta otherwise.
inline double design_index(const SetupSpec& spec, Point x) {
  if (!spec.multivariate()) return x[0];
  const auto b = SetupSpec::beta();
  return b[0] * x[0] + b[1] * x[1] + b[2] * x[2];
}

namespace synthetic_detail {

inline double v0(double t) { return 1.0 + 25.0 * t * t * t * t; }

inline double m0(int base, double t) {
  switch (base) {
    case 1: return 0.0;
    case 2: return 1.0 + 5.0 * t * t * t;
    default: return t * t + 5.0 * t * t * t * t;
  }
}

/// Laplace(center, b) by inversion, rejected until inside [lo, hi].
inline double truncated_laplace(RngState& rng, double center, double b, double lo, double hi) {
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const double u = rng.next_uniform() - 0.5;
    const double z = center - b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
    if (std::isfinite(z) && z >= lo && z <= hi) return z;
  }
  throw std::runtime_error("truncated_laplace: rejection sampler exceeded 10^6 attempts");
}

}  // namespace synthetic_detail

/// Draws n rows. Per row the stream yields the covariates first, then the noise.
inline Dataset generate(const SetupSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  using namespace synthetic_detail;
  RngState rng(seed);
  const std::size_t d = spec.dimension();
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  const int base = spec.base();
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (spec.multivariate()) {
      double norm = 0.0;
      do {
        for (std::size_t k = 0; k < 3; ++k) x(r, static_cast<Eigen::Index>(k)) = rng.next_gaussian();
        norm = x.row(r).norm();
      } while (norm == 0.0);
      x.row(r) /= norm;
    } else {
      x(r, 0) = rng.uniform(-1.0, 1.0);
    }
    const double t = design_index(spec, Point(x.data() + r * x.cols(), d));
    const double sd = std::sqrt(v0(t));
    const double m = m0(base, t);
    if (base == 3) {
      const double b = spec.laplace_std_scale ? sd / std::numbers::sqrt2 : sd;
      const double c = spec.laplace_mean_centered ? m : 0.0;
      y(r) = truncated_laplace(rng, m, b, c - 2.0 * sd, c + 2.0 * sd);
    } else {
      y(r) = m + rng.uniform(-1.0, 1.0) * sd;
    }
  }
  return Dataset(std::move(x), std::move(y));
}

struct OracleValues {
  double mean = 0.0;
  double width2 = 0.0;  // squared half-width of the optimal 100% band
};

/// Reference functions. For setup3 the pair is the Laplace center and (2 sqrt(v))^2.
inline OracleValues oracle_functions(const SetupSpec& spec, Point x) {
  if (x.size() != spec.dimension()) throw std::invalid_argument("oracle_functions: dimension mismatch");
  const double t = design_index(spec, x);
  const double v = synthetic_detail::v0(t);
  return {synthetic_detail::m0(spec.base(), t), spec.base() == 3 ? 4.0 * v : v};
}

/// Polynomial in x equal to sum_k c_k (x^T w)^k, expanded on the monomial basis.
inline CandidateFunction polynomial_of_projection(const std::vector<double>& c, std::span<const double> w,
                                                  CandidateRole role) {
  const int degree = static_cast<int>(c.size()) - 1;
  const auto features = FeatureMap::polynomial(w.size(), std::max(degree, 0));
  const auto exps = monomial_exponents(w.size(), std::max(degree, 0));
  std::vector<double> coef(exps.size(), 0.0);
  for (std::size_t m = 0; m < exps.size(); ++m) {
    int total = 0;
    double multinom = 1.0, prod = 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      for (int e = 1; e <= exps[m][k]; ++e) {
        ++total;
        multinom *= static_cast<double>(total) / e;
      }
      prod *= std::pow(w[k], exps[m][k]);
    }
    if (total < static_cast<int>(c.size())) coef[m] = c[static_cast<std::size_t>(total)] * multinom * prod;
  }
  return CandidateFunction(BasisExpansion{features, std::move(coef)}, role);
}

/// The true mean as a candidate function, exact on the monomial basis.
inline CandidateFunction oracle_mean_candidate(const SetupSpec& spec) {
  std::vector<double> c;
  switch (spec.base()) {
    case 1: c = {0.0}; break;
    case 2: c = {1.0, 0.0, 0.0, 5.0}; break;
    default: c = {0.0, 0.0, 1.0, 0.0, 5.0}; break;
  }
  if (spec.multivariate()) {
    const auto b = SetupSpec::beta();
    return polynomial_of_projection(c, b, CandidateRole::mean);
  }
  const double one[1] = {1.0};
  return polynomial_of_projection(c, one, CandidateRole::mean);
}

}  // namespace utopia
