#pragma once

// Exact population quantities on finite-support distributions, plus the
// randomized suites behind `verify-lemmas`.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "utopia/rng.hpp"

namespace utopia {

struct Atom {
  double x = 0.0;
  double y = 0.0;
  double p = 0.0;
};

class FiniteDistribution {
 public:
  explicit FiniteDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw std::invalid_argument("FiniteDistribution: empty support");
    double total = 0.0;
    for (const auto& a : atoms_) {
      if (!(a.p > 0.0)) throw std::invalid_argument("FiniteDistribution: probabilities must be > 0");
      if (!std::isfinite(a.x) || !std::isfinite(a.y)) throw std::invalid_argument("FiniteDistribution: non-finite atom");
      total += a.p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("FiniteDistribution: probabilities must sum to 1");
  }

  const std::vector<Atom>& atoms() const { return atoms_; }

  /// Atoms grouped by x, in increasing x.
  std::map<double, std::vector<Atom>> by_x() const {
    std::map<double, std::vector<Atom>> out;
    for (const auto& a : atoms_) out[a.x].push_back(a);
    return out;
  }

  std::map<double, double> marginal() const {
    std::map<double, double> out;
    for (const auto& a : atoms_) out[a.x] += a.p;
    return out;
  }

  std::map<double, double> conditional_mean() const {
    std::map<double, double> out;
    for (const auto& [x, atoms] : by_x()) {
      double num = 0.0, den = 0.0;
      for (const auto& a : atoms) {
        num += a.p * a.y;
        den += a.p;
      }
      out[x] = num / den;
    }
    return out;
  }

 private:
  std::vector<Atom> atoms_;
};

struct BandEnds {
  double lower = 0.0;
  double upper = 0.0;
  friend bool operator==(const BandEnds&, const BandEnds&) = default;
};

/// Smallest band with full conditional coverage: per-x support extremes.
inline std::map<double, BandEnds> population_optimal_band(const FiniteDistribution& dist) {
  std::map<double, BandEnds> out;
  for (const auto& [x, atoms] : dist.by_x()) {
    BandEnds e{atoms.front().y, atoms.front().y};
    for (const auto& a : atoms) {
      e.lower = std::min(e.lower, a.y);
      e.upper = std::max(e.upper, a.y);
    }
    out[x] = e;
  }
  return out;
}

/// f_m(x) = max over the conditional support of (y - m(x))^2.
inline std::map<double, double> population_fm(const FiniteDistribution& dist, const std::function<double(double)>& m) {
  std::map<double, double> out;
  for (const auto& [x, atoms] : dist.by_x()) {
    const double mx = m(x);
    double f = 0.0;
    for (const auto& a : atoms) f = std::max(f, (a.y - mx) * (a.y - mx));
    out[x] = f;
  }
  return out;
}

/// (sqrt(f_0(x)) + |m_0(x) - m(x)|)^2 for conditionally symmetric laws.
inline std::map<double, double> population_fm_closed_form(const FiniteDistribution& dist,
                                                          const std::function<double(double)>& m) {
  const auto m0 = dist.conditional_mean();
  const auto f0 = population_fm(dist, [&](double x) { return m0.at(x); });
  std::map<double, double> out;
  for (const auto& [x, f] : f0) {
    const double gap = std::sqrt(f) + std::abs(m0.at(x) - m(x));
    out[x] = gap * gap;
  }
  return out;
}

//------------------------------------------------------------------------------
// Randomized suites

struct LemmaSuiteResult {
  std::string name;
  int fixtures = 0;
  int failures = 0;
  double max_error = 0.0;
  bool passed() const { return fixtures > 0 && failures == 0; }
};

struct SymmetricFixture {
  FiniteDistribution dist;
  std::map<double, double> center;  // the symmetry center at each x
};

/// Up to 5 x-values; at each, up to 6 pairs c +/- d with equal mass on both sides.
inline SymmetricFixture random_symmetric_fixture(RngState& rng) {
  const int nx = 1 + static_cast<int>(rng.next_raw() % 5);
  std::vector<Atom> atoms;
  std::map<double, double> center;
  std::vector<double> weights;
  for (int i = 0; i < nx; ++i) {
    const double x = static_cast<double>(i) - 2.0;
    // Dyadic values keep the conditional mean exact in floating point.
    const double c = std::ldexp(std::floor(rng.uniform(-64.0, 64.0)), -4);
    center[x] = c;
    const int pairs = 1 + static_cast<int>(rng.next_raw() % 6);
    for (int k = 0; k < pairs; ++k) {
      const double d = std::ldexp(std::floor(rng.uniform(0.0, 64.0)), -4);
      const double w = 1.0 + std::floor(rng.uniform(0.0, 8.0));
      atoms.push_back({x, c - d, w});
      atoms.push_back({x, c + d, w});
      weights.push_back(w);
      weights.push_back(w);
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (auto& a : atoms) a.p /= total;
  // Absorb normalization round-off into the first pair so the masses sum to 1.
  double sum = 0.0;
  for (const auto& a : atoms) sum += a.p;
  atoms[0].p += (1.0 - sum) / 2.0;
  atoms[1].p += (1.0 - sum) / 2.0;
  return {FiniteDistribution(std::move(atoms)), std::move(center)};
}

/// population_fm against the closed form at a random mean, within 1e-12.
inline LemmaSuiteResult verify_qm_suite(int fixtures = 50, std::uint64_t seed = 1) {
  LemmaSuiteResult out{"Q_m", 0, 0, 0.0};
  RngState rng(seed);
  for (int f = 0; f < fixtures; ++f) {
    const auto fx = random_symmetric_fixture(rng);
    std::map<double, double> shift;
    for (const auto& [x, c] : fx.center) shift[x] = c + rng.uniform(-3.0, 3.0);
    const auto m = [&](double x) { return shift.at(x); };
    const auto direct = population_fm(fx.dist, m);
    const auto closed = population_fm_closed_form(fx.dist, m);
    double err = 0.0;
    for (const auto& [x, v] : direct) err = std::max(err, std::abs(v - closed.at(x)));
    ++out.fixtures;
    out.max_error = std::max(out.max_error, err);
    if (err > 1e-12) ++out.failures;
  }
  return out;
}

/// E f_m(X) >= E f_0(X) + E (m(X) - m_0(X))^2 on the same fixtures.
inline LemmaSuiteResult verify_qm_width_gap_suite(int fixtures = 50, std::uint64_t seed = 1) {
  LemmaSuiteResult out{"Q_m width gap", 0, 0, 0.0};
  RngState rng(seed);
  for (int f = 0; f < fixtures; ++f) {
    const auto fx = random_symmetric_fixture(rng);
    std::map<double, double> shift;
    for (const auto& [x, c] : fx.center) shift[x] = c + rng.uniform(-3.0, 3.0);
    const auto m0 = fx.dist.conditional_mean();
    const auto fm = population_fm(fx.dist, [&](double x) { return shift.at(x); });
    const auto f0 = population_fm(fx.dist, [&](double x) { return m0.at(x); });
    double lhs = 0.0, rhs = 0.0;
    for (const auto& [x, p] : fx.dist.marginal()) {
      lhs += p * fm.at(x);
      rhs += p * (f0.at(x) + (shift.at(x) - m0.at(x)) * (shift.at(x) - m0.at(x)));
    }
    ++out.fixtures;
    out.max_error = std::max(out.max_error, rhs - lhs);
    if (lhs < rhs - 1e-12 * std::max(1.0, rhs)) ++out.failures;
  }
  return out;
}

/// population_optimal_band against the conditional quantiles F^{-1}(0) and
/// F^{-1}(1), read off the sorted conditional support.
inline LemmaSuiteResult verify_optimal_band_suite(int fixtures = 50, std::uint64_t seed = 2) {
  LemmaSuiteResult out{"optimal band", 0, 0, 0.0};
  RngState rng(seed);
  for (int f = 0; f < fixtures; ++f) {
    const auto fx = random_symmetric_fixture(rng);
    const auto band = population_optimal_band(fx.dist);
    bool ok = true;
    for (const auto& [x, atoms] : fx.dist.by_x()) {
      std::vector<std::pair<double, double>> ys;
      for (const auto& a : atoms) ys.emplace_back(a.y, a.p);
      std::sort(ys.begin(), ys.end());
      // F^{-1}(0): first point of positive mass. F^{-1}(1): last point of positive mass.
      double lo = ys.front().first, hi = ys.back().first;
      for (const auto& [y, p] : ys)
        if (p > 0.0) {
          lo = y;
          break;
        }
      for (auto it = ys.rbegin(); it != ys.rend(); ++it)
        if (it->second > 0.0) {
          hi = it->first;
          break;
        }
      const auto& e = band.at(x);
      if (e.lower != lo || e.upper != hi) ok = false;
      out.max_error = std::max({out.max_error, std::abs(e.lower - lo), std::abs(e.upper - hi)});
    }
    ++out.fixtures;
    if (!ok) ++out.failures;
  }
  return out;
}

inline std::vector<LemmaSuiteResult> verify_lemmas(int fixtures = 50) {
  return {verify_optimal_band_suite(fixtures), verify_qm_suite(fixtures), verify_qm_width_gap_suite(fixtures)};
}

}  // namespace utopia
