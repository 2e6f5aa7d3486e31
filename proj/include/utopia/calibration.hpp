#pragma once

// Shrinking a 100% band to level 1 - alpha on the adjustment split.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "utopia/model.hpp"

namespace utopia {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationResult {
  double lambda = 1.0;
  std::size_t selected_count = 0;
  std::size_t adj_count = 0;
  double empirical_miscoverage_on_selected = 0.0;
};

/// Largest k with k / n <= alpha, evaluated exactly as written so it agrees
/// with a scan over the same floating-point comparisons.
inline std::size_t max_exceedances(double alpha, std::size_t n) {
  const double nd = static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::min(nd, std::max(0.0, std::floor(alpha * nd))));
  while (k < n && static_cast<double>(k + 1) / nd <= alpha) ++k;
  while (k > 0 && static_cast<double>(k) / nd > alpha) --k;
  return k;
}

/// inf{lambda >= 0 : #{r_i > lambda} / n <= alpha}: the (k+1)-th largest ratio,
/// or 0 when k reaches n.
inline double lambda_quantile(std::vector<double> ratios, double alpha) {
  if (ratios.empty()) throw CalibrationError("no in-band calibration points");
  const std::size_t n = ratios.size();
  const std::size_t k = max_exceedances(alpha, n);
  if (k >= n) return 0.0;
  std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(k), ratios.end(), std::greater<>());
  return std::max(0.0, ratios[k]);
}

/// Ratios (y - m(x))^2 / (f(x) + delta) over the adjustment split, restricted to
/// points inside the uncalibrated band when `use_selection` is set.
inline std::vector<double> calibration_ratios(const BandModel& b, const Dataset& adj, double delta, bool use_selection) {
  std::vector<double> r;
  r.reserve(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    const double res = adj.response(i) - b.mean(adj.point(i));
    const double s = res * res;
    const double w = b.width2(adj.point(i)) + delta;
    if (use_selection && s > w) continue;
    r.push_back(s == 0.0 ? 0.0 : (w > 0.0 ? s / w : INFINITY));
  }
  return r;
}

inline CalibrationResult calibrate_lambda(const BandModel& b, const Dataset& adj, double alpha, double delta,
                                          bool use_selection = true) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("calibrate_lambda: alpha must lie in [0, 1)");
  if (!(delta >= 0.0)) throw std::invalid_argument("calibrate_lambda: delta must be >= 0");
  if (adj.empty()) throw std::invalid_argument("calibrate_lambda: empty adjustment split");
  const auto ratios = calibration_ratios(b, adj, delta, use_selection);
  CalibrationResult out;
  out.adj_count = adj.size();
  out.selected_count = ratios.size();
  out.lambda = lambda_quantile(ratios, alpha);
  const auto miss = std::count_if(ratios.begin(), ratios.end(), [&](double r) { return r > out.lambda; });
  out.empirical_miscoverage_on_selected = static_cast<double>(miss) / static_cast<double>(ratios.size());
  return out;
}

/// Copy of `b` carrying the calibrated lambda and delta.
inline BandModel calibrated(BandModel b, const CalibrationResult& c, double delta) {
  b.lambda = c.lambda;
  b.delta = delta;
  return b;
}

}  // namespace utopia
