#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "utopia/features.hpp"
#include "utopia/rng.hpp"

namespace utopia {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Point = std::span<const double>;

inline constexpr double kDefaultNonnegFloor = 1e-8;
inline constexpr double kDefaultTruncLevel = 1e6;

//------------------------------------------------------------------------------
// Dataset

/// n observations of (x in R^d, y in R). All entries are finite and d >= 1.
/// A dataset may be empty only as the result of a split with a zero-size part.
class Dataset {
 public:
  Dataset() = default;

  Dataset(RowMatrix x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() != y_.size())
      throw std::invalid_argument("Dataset: " + std::to_string(x_.rows()) + " covariate rows but " +
                                  std::to_string(y_.size()) + " responses");
    if (x_.cols() < 1) throw std::invalid_argument("Dataset: dimension must be >= 1");
    if (!x_.allFinite() || !y_.allFinite()) throw std::invalid_argument("Dataset: non-finite entry");
  }

  /// One-dimensional convenience constructor.
  static Dataset from_1d(std::span<const double> x, std::span<const double> y) {
    RowMatrix xm(static_cast<Eigen::Index>(x.size()), 1);
    Eigen::VectorXd ym(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) xm(static_cast<Eigen::Index>(i), 0) = x[i];
    for (std::size_t i = 0; i < y.size(); ++i) ym(static_cast<Eigen::Index>(i)) = y[i];
    return Dataset(std::move(xm), std::move(ym));
  }

  std::size_t size() const { return static_cast<std::size_t>(y_.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(x_.cols()); }
  bool empty() const { return y_.size() == 0; }

  Point point(std::size_t i) const {
    return {x_.data() + static_cast<Eigen::Index>(i) * x_.cols(), static_cast<std::size_t>(x_.cols())};
  }
  double response(std::size_t i) const { return y_(static_cast<Eigen::Index>(i)); }

  const RowMatrix& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }

  Dataset subset(std::span<const std::size_t> idx) const {
    RowMatrix xs(static_cast<Eigen::Index>(idx.size()), x_.cols());
    Eigen::VectorXd ys(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= size()) throw std::out_of_range("Dataset::subset: index out of range");
      xs.row(static_cast<Eigen::Index>(k)) = x_.row(static_cast<Eigen::Index>(idx[k]));
      ys(static_cast<Eigen::Index>(k)) = y_(static_cast<Eigen::Index>(idx[k]));
    }
    Dataset out;
    out.x_ = std::move(xs);
    out.y_ = std::move(ys);
    return out;
  }

  /// Rows of `a` followed by rows of `b`.
  static Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.dim() != b.dim()) throw std::invalid_argument("Dataset::concat: dimension mismatch");
    RowMatrix x(a.x_.rows() + b.x_.rows(), a.x_.cols());
    x << a.x_, b.x_;
    Eigen::VectorXd y(a.y_.size() + b.y_.size());
    y << a.y_, b.y_;
    return Dataset(std::move(x), std::move(y));
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.x_.rows() == b.x_.rows() && a.x_.cols() == b.x_.cols() && a.x_ == b.x_ && a.y_ == b.y_;
  }

 private:
  RowMatrix x_;
  Eigen::VectorXd y_;
};

//------------------------------------------------------------------------------
// Splits

struct SplitPlan {
  std::size_t n_pre = 0;
  std::size_t n_opt = 0;
  std::size_t n_adj = 0;
  std::size_t n_test = 0;

  std::size_t total() const { return n_pre + n_opt + n_adj + n_test; }
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct SplitParts {
  Dataset pre, opt, adj, test;
  // Original row indices of each part, in part order.
  std::array<std::vector<std::size_t>, 4> indices;
};

/// Partition `ds` into the four parts of `plan`. The rows are permuted by a
/// Fisher-Yates shuffle driven by `rng` unless `sequential` is set, in which
/// case the parts are contiguous blocks in the original order.
inline SplitParts split_dataset(const Dataset& ds, const SplitPlan& plan, RngState& rng, bool sequential = false) {
  if (plan.total() != ds.size())
    throw std::invalid_argument("split_dataset: plan sums to " + std::to_string(plan.total()) +
                                " but dataset has " + std::to_string(ds.size()) + " rows");
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (!sequential) {
    for (std::size_t i = perm.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.next_raw() % i);
      std::swap(perm[i - 1], perm[j]);
    }
  }
  SplitParts parts;
  const std::array<std::size_t, 4> sizes{plan.n_pre, plan.n_opt, plan.n_adj, plan.n_test};
  std::array<Dataset*, 4> dst{&parts.pre, &parts.opt, &parts.adj, &parts.test};
  std::size_t offset = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    parts.indices[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(offset),
                            perm.begin() + static_cast<std::ptrdiff_t>(offset + sizes[k]));
    *dst[k] = ds.subset(parts.indices[k]);
    offset += sizes[k];
  }
  return parts;
}

//------------------------------------------------------------------------------
// Candidate functions

inline double squared_distance(Point a, Point b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

/// exp(-|a-b|^2 / (2 h^2))
inline double gaussian_kernel(Point a, Point b, double h) {
  return std::exp(-squared_distance(a, b) / (2.0 * h * h));
}

enum class CandidateRole { width, mean };

struct BasisExpansion {
  FeatureMap features;
  std::vector<double> coefficients;
};

/// Nadaraya-Watson smoother of `values` attached to `anchors`, Gaussian kernel.
struct KernelSmoother {
  std::shared_ptr<const RowMatrix> anchors;
  std::vector<double> values;
  double bandwidth = 1.0;
};

/// f(x) = <k_x, B k_x> with B = V V^T stored through its factor V.
struct KernelQuadratic {
  std::shared_ptr<const RowMatrix> anchors;
  Eigen::MatrixXd factor;
  double sigma = 1.0;
};

struct ConstantFn {
  double value = 0.0;
};

/// A member of one of the candidate sets. Width candidates are clipped to
/// [nonneg_floor, trunc_level], mean candidates to [-trunc_level, trunc_level].
class CandidateFunction {
 public:
  using Kind = std::variant<BasisExpansion, KernelSmoother, KernelQuadratic, ConstantFn>;

  CandidateFunction(Kind kind, CandidateRole role, double nonneg_floor = kDefaultNonnegFloor,
                    double trunc_level = kDefaultTruncLevel)
      : kind_(std::move(kind)), role_(role), floor_(nonneg_floor), trunc_(trunc_level) {
    if (!(floor_ >= 0.0)) throw std::invalid_argument("CandidateFunction: nonneg_floor must be >= 0");
    if (!(trunc_ > 0.0) || trunc_ < floor_)
      throw std::invalid_argument("CandidateFunction: trunc_level must be > 0 and >= nonneg_floor");
    if (const auto* b = std::get_if<BasisExpansion>(&kind_); b && b->coefficients.size() != b->features.size())
      throw std::invalid_argument("CandidateFunction: coefficient count does not match feature map");
    if (const auto* k = std::get_if<KernelSmoother>(&kind_)) {
      if (!k->anchors || static_cast<std::size_t>(k->anchors->rows()) != k->values.size() || k->values.empty())
        throw std::invalid_argument("CandidateFunction: smoother needs one value per anchor");
      if (!(k->bandwidth > 0.0)) throw std::invalid_argument("CandidateFunction: bandwidth must be > 0");
    }
    if (const auto* q = std::get_if<KernelQuadratic>(&kind_)) {
      if (!q->anchors || q->anchors->rows() != q->factor.rows())
        throw std::invalid_argument("CandidateFunction: quadratic factor rows must match anchors");
      if (!(q->sigma > 0.0)) throw std::invalid_argument("CandidateFunction: kernel width must be > 0");
    }
  }

  const Kind& kind() const { return kind_; }
  CandidateRole role() const { return role_; }
  double nonneg_floor() const { return floor_; }
  double trunc_level() const { return trunc_; }
  double scale() const { return scale_; }

  /// Covariate dimension, or nullopt for constants (which accept any x).
  std::optional<std::size_t> dimension() const {
    return std::visit(
        [](const auto& k) -> std::optional<std::size_t> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, BasisExpansion>) return k.features.dim();
          else if constexpr (std::is_same_v<T, ConstantFn>) return std::nullopt;
          else return static_cast<std::size_t>(k.anchors->cols());
        },
        kind_);
  }

  /// Unclipped value (times the scale factor).
  double raw(Point x) const {
    if (auto d = dimension(); d && *d != x.size())
      throw std::invalid_argument("CandidateFunction: expected " + std::to_string(*d) + " covariates, got " +
                                  std::to_string(x.size()));
    return scale_ * std::visit([&](const auto& k) { return eval_kind(k, x); }, kind_);
  }

  double operator()(Point x) const {
    const double v = raw(x);
    if (role_ == CandidateRole::width) return std::clamp(v, floor_, trunc_);
    return std::clamp(v, -trunc_, trunc_);
  }

  /// c * f, with c > 0.
  CandidateFunction scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("CandidateFunction::scaled: c must be > 0");
    CandidateFunction out = *this;
    out.scale_ *= c;
    return out;
  }

 private:
  static double eval_kind(const BasisExpansion& b, Point x) {
    const auto phi = b.features(x);
    double v = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) v += b.coefficients[k] * phi[k];
    return v;
  }

  static double eval_kind(const KernelSmoother& s, Point x) {
    const RowMatrix& a = *s.anchors;
    const auto n = static_cast<std::size_t>(a.rows());
    const auto d = static_cast<std::size_t>(a.cols());
    // Shift exponents by the nearest anchor so the weights never all underflow.
    std::vector<double> d2(n);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = squared_distance(Point(a.data() + i * d, d), x);
      dmin = std::min(dmin, d2[i]);
    }
    const double inv = 1.0 / (2.0 * s.bandwidth * s.bandwidth);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::exp(-(d2[i] - dmin) * inv);
      num += w * s.values[i];
      den += w;
    }
    return num / std::max(den, 1e-300);
  }

  static double eval_kind(const KernelQuadratic& q, Point x) {
    const RowMatrix& a = *q.anchors;
    const auto d = static_cast<std::size_t>(a.cols());
    Eigen::VectorXd kx(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      kx(i) = gaussian_kernel(Point(a.data() + i * a.cols(), d), x, q.sigma);
    return (q.factor.transpose() * kx).squaredNorm();
  }

  static double eval_kind(const ConstantFn& c, Point) { return c.value; }

  Kind kind_;
  CandidateRole role_;
  double floor_;
  double trunc_;
  double scale_ = 1.0;
};

inline double evaluate_candidate(const CandidateFunction& f, Point x) { return f(x); }

inline CandidateFunction make_constant(double c, CandidateRole role = CandidateRole::width) {
  return CandidateFunction(ConstantFn{c}, role);
}

//------------------------------------------------------------------------------
// Bands

struct PredictionInterval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
};

/// m(x) +/- sqrt(lambda * (f(x) + delta)) with m = sum beta_l m_l and
/// f = sum a_j f_j, a >= 0.
struct BandModel {
  std::vector<double> mean_weights;
  std::vector<CandidateFunction> mean_candidates;
  std::vector<double> width_weights;
  std::vector<CandidateFunction> width_candidates;
  double delta = 0.0;
  double lambda = 1.0;

  void validate() const {
    if (mean_weights.size() != mean_candidates.size())
      throw std::invalid_argument("BandModel: mean weight/candidate count mismatch");
    if (width_weights.size() != width_candidates.size())
      throw std::invalid_argument("BandModel: width weight/candidate count mismatch");
    for (double a : width_weights)
      if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("BandModel: width weights must be >= 0");
    for (const auto& f : width_candidates)
      if (f.role() != CandidateRole::width) throw std::invalid_argument("BandModel: width candidate has mean role");
    if (!(delta >= 0.0)) throw std::invalid_argument("BandModel: delta must be >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("BandModel: lambda must be >= 0");
  }

  double mean(Point x) const {
    double m = 0.0;
    for (std::size_t l = 0; l < mean_weights.size(); ++l)
      if (mean_weights[l] != 0.0) m += mean_weights[l] * mean_candidates[l](x);
    return m;
  }

  /// Squared half-width of the uncalibrated 100% band, without delta.
  double width2(Point x) const {
    double f = 0.0;
    for (std::size_t j = 0; j < width_weights.size(); ++j)
      if (width_weights[j] != 0.0) f += width_weights[j] * width_candidates[j](x);
    return f;
  }
};

inline PredictionInterval predict_interval(const BandModel& b, Point x) {
  const double m = b.mean(x);
  const double h = std::sqrt(b.lambda * (b.width2(x) + b.delta));
  return {m - h, m + h};
}

/// Band given by two real functions; endpoints are swapped pointwise if they cross.
struct LowerUpperBand {
  CandidateFunction lower;
  CandidateFunction upper;
};

inline PredictionInterval predict_interval(const LowerUpperBand& b, Point x) {
  const double l = b.lower(x);
  const double u = b.upper(x);
  return {std::min(l, u), std::max(l, u)};
}

/// Constant-width band m(x) +/- q; q may be +infinity.
struct ConformalBand {
  CandidateFunction mean;
  double q = 0.0;
};

inline PredictionInterval predict_interval(const ConformalBand& b, Point x) {
  if (std::isinf(b.q))
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  const double m = b.mean(x);
  return {m - b.q, m + b.q};
}

template <class B>
concept IntervalBand = requires(const B& b, Point x) {
  { predict_interval(b, x) } -> std::same_as<PredictionInterval>;
};

}  // namespace utopia
