#include <gtest/gtest.h>

#include "utopia/lp.hpp"
#include "utopia/lp_oracle.hpp"
#include "utopia/rng.hpp"

using namespace utopia;

namespace {

LpProblem make(std::initializer_list<double> c, std::initializer_list<std::initializer_list<double>> a,
               std::initializer_list<double> b) {
  Eigen::VectorXd cv(static_cast<Eigen::Index>(c.size()));
  Eigen::Index k = 0;
  for (double v : c) cv(k++) = v;
  Eigen::MatrixXd am(static_cast<Eigen::Index>(a.size()), cv.size());
  Eigen::Index i = 0;
  for (const auto& row : a) {
    Eigen::Index j = 0;
    for (double v : row) am(i, j++) = v;
    ++i;
  }
  Eigen::VectorXd bv(static_cast<Eigen::Index>(b.size()));
  k = 0;
  for (double v : b) bv(k++) = v;
  return LpProblem(cv, am, bv);
}

}  // namespace

TEST(SolveLp, SingleActiveConstraint) {
  const auto s = solve_lp(make({1}, {{1}}, {2}));
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.x(0), 2.0, 1e-8);
  EXPECT_NEAR(s.objective, 2.0, 1e-8);
}

TEST(SolveLp, TwoVariableVertex) {
  // Vertex enumeration by hand: (2/3, 2/3) -> 4/3; (0,2) and (2,0) -> 2.
  const auto p = make({1, 1}, {{1, 2}, {2, 1}}, {2, 2});
  const auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.x(0), 2.0 / 3.0, 1e-8);
  EXPECT_NEAR(s.x(1), 2.0 / 3.0, 1e-8);
  EXPECT_NEAR(s.objective, 4.0 / 3.0, 1e-8);
  EXPECT_LE(s.max_primal_violation, 1e-8);
}

TEST(SolveLp, ContradictoryConstraintsAreInfeasible) {
  EXPECT_EQ(solve_lp(make({1}, {{1}, {-1}}, {1, 0})).status, LpStatus::infeasible);
}

TEST(SolveLp, UnboundedDirection) {
  auto p = make({-1}, {{1}}, {0});
  EXPECT_EQ(solve_lp(p).status, LpStatus::unbounded);
}

TEST(SolveLp, FreeVariablesAndBoxes) {
  // min x - y, x free, y in [0, 5], x + y >= -1
  auto p = make({1, -1}, {{1, 1}}, {-1});
  p.lower << -kInf, 0;
  p.upper << kInf, 5;
  const auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.x(0), -6.0, 1e-7);
  EXPECT_NEAR(s.x(1), 5.0, 1e-7);
}

TEST(VertexOracle, Examples) {
  const auto s = enumerate_vertices_oracle(make({1, 1}, {{1, 2}, {2, 1}}, {2, 2}));
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.x(0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.x(1), 2.0 / 3.0, 1e-12);

  auto box = make({1}, {}, {});
  box.upper(0) = 1.0;
  const auto b = enumerate_vertices_oracle(box);
  ASSERT_EQ(b.status, LpStatus::optimal);
  EXPECT_EQ(b.objective, 0.0);

  EXPECT_EQ(enumerate_vertices_oracle(make({1}, {{1}, {-1}}, {1, 0})).status, LpStatus::infeasible);
  EXPECT_THROW(enumerate_vertices_oracle(LpProblem(Eigen::VectorXd::Zero(7), Eigen::MatrixXd::Zero(0, 7), Eigen::VectorXd(0))),
               std::invalid_argument);
}

// Random small LPs: x0 is feasible by construction and the box keeps the
// problem bounded.
LpProblem random_lp(RngState& rng) {
  const auto n = static_cast<Eigen::Index>(1 + rng.next_raw() % 5);
  const auto k = static_cast<Eigen::Index>(1 + rng.next_raw() % 8);
  auto coef = [&] { return static_cast<double>(static_cast<int>(rng.next_raw() % 11) - 5); };
  Eigen::VectorXd x0(n);
  for (Eigen::Index j = 0; j < n; ++j) x0(j) = static_cast<double>(rng.next_raw() % 4);
  Eigen::MatrixXd a(k, n);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = coef();
  Eigen::VectorXd b = a * x0;
  for (Eigen::Index i = 0; i < k; ++i) b(i) -= static_cast<double>(rng.next_raw() % 3);
  Eigen::VectorXd c(n);
  for (Eigen::Index j = 0; j < n; ++j) c(j) = coef();
  LpProblem p(c, a, b);
  p.upper.setConstant(10.0);
  return p;
}

TEST(SolveLp, MatchesVertexEnumerationOnRandomProblems) {
  RngState rng(2024);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_lp(rng);
    const auto ipm = solve_lp(p);
    const auto ref = enumerate_vertices_oracle(p);
    ASSERT_EQ(ref.status, LpStatus::optimal);
    ASSERT_EQ(ipm.status, LpStatus::optimal) << "trial " << t;
    EXPECT_NEAR(ipm.objective, ref.objective, 1e-6) << "trial " << t;
    EXPECT_LE(ipm.max_primal_violation, 1e-8);
  }
}

TEST(SolveLp, ObjectiveScaling) {
  const auto p = make({1, 3}, {{1, 2}, {2, 1}}, {2, 2});
  auto q = p;
  q.c *= 7.5;
  const auto a = solve_lp(p), b = solve_lp(q);
  EXPECT_NEAR(b.objective, 7.5 * a.objective, 1e-8);
  EXPECT_NEAR((a.x - b.x).cwiseAbs().maxCoeff(), 0.0, 1e-8);
}

TEST(SolveLp, Deterministic) {
  RngState rng(5);
  const auto p = random_lp(rng);
  const auto a = solve_lp(p), b = solve_lp(p);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.objective, b.objective);
}
