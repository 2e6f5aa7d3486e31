#include <gtest/gtest.h>

#include "utopia/theory_oracle.hpp"

using namespace utopia;

TEST(PopulationOptimalBand, Examples) {
  const FiniteDistribution two({{0, -1, 0.5}, {0, 1, 0.5}});
  EXPECT_EQ(population_optimal_band(two).at(0.0), (BandEnds{-1.0, 1.0}));

  const FiniteDistribution flat({{0, 3, 0.25}, {1, 3, 0.75}});
  for (const auto& [x, e] : population_optimal_band(flat)) EXPECT_EQ(e, (BandEnds{3.0, 3.0}));

  const FiniteDistribution mixed({{0, 1, 0.25}, {0, 2, 0.25}, {1, 5, 0.5}});
  const auto band = population_optimal_band(mixed);
  EXPECT_EQ(band.at(0.0).upper, 2.0);
  EXPECT_EQ(band.at(1.0).upper, 5.0);
}

TEST(PopulationFm, Examples) {
  const FiniteDistribution two({{0, -1, 0.5}, {0, 1, 0.5}});
  EXPECT_DOUBLE_EQ(population_fm(two, [](double) { return 0.5; }).at(0.0), 2.25);
  EXPECT_DOUBLE_EQ(population_fm(two, [](double) { return 0.0; }).at(0.0), 1.0);

  const FiniteDistribution wide({{0, -2, 0.5}, {0, 2, 0.5}});
  const auto m = [](double) { return -2.0; };
  EXPECT_DOUBLE_EQ(population_fm(wide, m).at(0.0), 16.0);
  EXPECT_DOUBLE_EQ(population_fm_closed_form(wide, m).at(0.0), 16.0);
}

TEST(FiniteDistribution, Validation) {
  EXPECT_THROW(FiniteDistribution({}), std::invalid_argument);
  EXPECT_THROW(FiniteDistribution({{0, 1, 0.5}}), std::invalid_argument);
  EXPECT_THROW(FiniteDistribution({{0, 1, 1.5}, {0, 2, -0.5}}), std::invalid_argument);
}

TEST(LemmaSuites, AllPass) {
  for (const auto& r : verify_lemmas(50)) {
    EXPECT_TRUE(r.passed()) << r.name << " failures " << r.failures << " max error " << r.max_error;
    EXPECT_EQ(r.fixtures, 50);
  }
}

TEST(LemmaSuites, FixturesAreSymmetric) {
  RngState rng(9);
  for (int f = 0; f < 20; ++f) {
    const auto fx = random_symmetric_fixture(rng);
    const auto m0 = fx.dist.conditional_mean();
    for (const auto& [x, c] : fx.center) EXPECT_NEAR(m0.at(x), c, 1e-12);
  }
}
