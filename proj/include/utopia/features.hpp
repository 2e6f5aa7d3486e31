#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace utopia {

/// Exponent vectors of all monomials in `dim` variables with total degree at
/// most `degree`, graded lexicographic: by total degree, then lexicographically
/// descending on the exponent vector (x1^2 before x1*x2 before x2^2).
inline std::vector<std::vector<int>> monomial_exponents(std::size_t dim, int degree) {
  if (degree < 0) throw std::invalid_argument("monomial_exponents: degree must be >= 0");
  std::vector<std::vector<int>> out;
  std::vector<int> e(dim, 0);
  for (int total = 0; total <= degree; ++total) {
    // Enumerate compositions of `total` into `dim` parts, lexicographically descending.
    auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
      if (pos + 1 == dim) {
        e[pos] = remaining;
        out.push_back(e);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[pos] = k;
        self(self, pos + 1, remaining - k);
      }
    };
    if (dim == 0) {
      if (total == 0) out.emplace_back();
      continue;
    }
    rec(rec, 0, total);
  }
  return out;
}

/// Basis used by expansion candidates.
class FeatureMap {
 public:
  enum class Kind { polynomial, linear_with_intercept };

  FeatureMap() : FeatureMap(Kind::polynomial, 1, 1) {}
  FeatureMap(Kind k, int deg, std::size_t d) : kind_(k), degree_(deg), dim_(d) {
    if (kind_ == Kind::polynomial) exponents_ = monomial_exponents(dim_, degree_);
  }

  Kind kind() const { return kind_; }
  int degree() const { return degree_; }
  std::size_t dim() const { return dim_; }

  static FeatureMap polynomial(std::size_t dim, int degree) {
    if (degree < 0) throw std::invalid_argument("FeatureMap: degree must be >= 0");
    if (dim == 0) throw std::invalid_argument("FeatureMap: dimension must be >= 1");
    return FeatureMap(Kind::polynomial, degree, dim);
  }
  static FeatureMap linear(std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("FeatureMap: dimension must be >= 1");
    return FeatureMap(Kind::linear_with_intercept, 1, dim);
  }

  std::size_t size() const {
    if (kind_ == Kind::linear_with_intercept) return dim_ + 1;
    return exponents_.size();
  }

  void apply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim_)
      throw std::invalid_argument("FeatureMap: expected " + std::to_string(dim_) + " covariates, got " +
                                  std::to_string(x.size()));
    if (kind_ == Kind::linear_with_intercept) {
      out[0] = 1.0;
      for (std::size_t j = 0; j < dim_; ++j) out[j + 1] = x[j];
      return;
    }
    const auto& exps = exponents_;
    for (std::size_t k = 0; k < exps.size(); ++k) {
      double v = 1.0;
      for (std::size_t j = 0; j < dim_; ++j)
        for (int p = 0; p < exps[k][j]; ++p) v *= x[j];
      out[k] = v;
    }
  }

  std::vector<double> operator()(std::span<const double> x) const {
    std::vector<double> out(size());
    apply(x, out);
    return out;
  }

  friend bool operator==(const FeatureMap& a, const FeatureMap& b) {
    return a.kind_ == b.kind_ && a.degree_ == b.degree_ && a.dim_ == b.dim_;
  }

 private:
  Kind kind_;
  int degree_;
  std::size_t dim_;
  std::vector<std::vector<int>> exponents_;
};

/// Graded-lex monomials of `x` up to `degree`; the first entry is always 1.
inline std::vector<double> polynomial_features(std::span<const double> x, int degree) {
  return FeatureMap::polynomial(x.size(), degree)(x);
}

}  // namespace utopia
