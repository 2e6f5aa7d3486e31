#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "utopia/calibration.hpp"
#include "utopia/rng.hpp"

using namespace utopia;

namespace {

// Smallest candidate in {0} U {r_i} whose exceedance rate is <= alpha.
double brute_force_lambda(const std::vector<double>& r, double alpha) {
  std::vector<double> cand{0.0};
  cand.insert(cand.end(), r.begin(), r.end());
  std::sort(cand.begin(), cand.end());
  for (double lam : cand) {
    std::size_t over = 0;
    for (double v : r) over += v > lam ? 1 : 0;
    if (static_cast<double>(over) / static_cast<double>(r.size()) <= alpha) return lam;
  }
  return cand.back();
}

// Band with zero mean and constant squared half-width 1, so the ratios are y^2.
BandModel unit_band() {
  BandModel b;
  b.mean_candidates = {make_constant(0.0, CandidateRole::mean)};
  b.mean_weights = {1.0};
  b.width_candidates = {make_constant(1.0)};
  b.width_weights = {1.0};
  return b;
}

Dataset from_ratios(const std::vector<double>& r) {
  std::vector<double> x(r.size()), y(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    x[i] = static_cast<double>(i);
    y[i] = std::sqrt(r[i]);
  }
  return Dataset::from_1d(x, y);
}

}  // namespace

TEST(CalibrateLambda, Examples) {
  const std::vector<double> ten{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  EXPECT_DOUBLE_EQ(lambda_quantile(ten, 0.2), 0.8);
  EXPECT_DOUBLE_EQ(brute_force_lambda(ten, 0.2), 0.8);
  EXPECT_DOUBLE_EQ(lambda_quantile(ten, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(lambda_quantile(std::vector<double>(10, 0.5), 0.3), 0.5);
}

TEST(CalibrateLambda, ThroughBand) {
  const auto adj = from_ratios({0.25, 0.64, 0.09, 2.0, 0.81});
  const auto c = calibrate_lambda(unit_band(), adj, 0.25, 0.0);
  EXPECT_EQ(c.adj_count, 5u);
  EXPECT_EQ(c.selected_count, 4u);  // 2.0 lies outside the band
  EXPECT_NEAR(c.lambda, 0.64, 1e-15);
  EXPECT_DOUBLE_EQ(c.empirical_miscoverage_on_selected, 0.25);

  const auto plain = calibrate_lambda(unit_band(), adj, 0.25, 0.0, false);
  EXPECT_EQ(plain.selected_count, 5u);
  EXPECT_NEAR(plain.lambda, 0.81, 1e-15);
}

TEST(CalibrateLambda, DeltaEntersDenominator) {
  const auto adj = from_ratios({1.0, 0.5});
  const auto c = calibrate_lambda(unit_band(), adj, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(c.lambda, 0.5);
}

TEST(CalibrateLambda, Errors) {
  const auto outside = from_ratios({4.0, 9.0});
  EXPECT_THROW(calibrate_lambda(unit_band(), outside, 0.1, 0.0), CalibrationError);
  EXPECT_THROW(calibrate_lambda(unit_band(), outside, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(calibrate_lambda(unit_band(), Dataset(), 0.1, 0.0), std::invalid_argument);
}

TEST(CalibrateLambda, ZeroWidthZeroResidual) {
  BandModel b = unit_band();
  b.width_candidates = {CandidateFunction(ConstantFn{0.0}, CandidateRole::width, 0.0)};
  const auto adj = Dataset::from_1d(std::vector<double>{0, 1}, std::vector<double>{0, 0});
  const auto c = calibrate_lambda(b, adj, 0.1, 0.0);
  EXPECT_EQ(c.selected_count, 2u);
  EXPECT_EQ(c.lambda, 0.0);
}

TEST(CalibrateLambda, MatchesBruteForceOnRandomSets) {
  RngState rng(2024);
  const std::vector<double> alphas{0.0, 0.05, 0.1, 0.2, 0.29, 0.3, 0.5, 0.7, 0.95};
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.next_raw() % 120;
    std::vector<double> r(n);
    // Coarse grid so ties are frequent.
    for (auto& v : r) v = std::floor(rng.next_uniform() * 12.0) / 11.0;
    for (double a : alphas) ASSERT_EQ(lambda_quantile(r, a), brute_force_lambda(r, a)) << "n " << n << " alpha " << a;
  }
}

TEST(CalibrateLambda, Properties) {
  RngState rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 20 + rng.next_raw() % 100;
    std::vector<double> r(n);
    for (auto& v : r) v = rng.next_uniform();
    const auto adj = from_ratios(r);
    double prev = INFINITY;
    for (int g = 0; g <= 10; ++g) {
      const double a = 0.05 * g;
      const auto c = calibrate_lambda(unit_band(), adj, a, 0.0);
      EXPECT_LE(c.lambda, prev);
      EXPECT_GE(c.lambda, 0.0);
      EXPECT_LE(c.lambda, 1.0);
      EXPECT_LE(c.empirical_miscoverage_on_selected, a);
      if (c.lambda > 0.0) EXPECT_GT(c.empirical_miscoverage_on_selected, a - 1.0 / static_cast<double>(c.selected_count));
      prev = c.lambda;
    }
  }
}

TEST(MaxExceedances, FloatingPointEdges) {
  // 0.29 * 100 rounds below 29, yet 29 / 100 <= 0.29 holds.
  EXPECT_EQ(max_exceedances(0.29, 100), 29u);
  EXPECT_EQ(max_exceedances(0.0, 10), 0u);
  EXPECT_EQ(max_exceedances(0.999, 10), 9u);
}
