#pragma once

// Exhaustive vertex enumeration for tiny LPs. Test oracle only: it shares no
// code with the interior-point path.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "utopia/lp.hpp"

namespace utopia {

inline LpSolution enumerate_vertices_oracle(const LpProblem& p) {
  p.validate();
  const Eigen::Index n = p.num_vars();
  if (n > 6 || p.num_rows() > 10) throw std::invalid_argument("enumerate_vertices_oracle: at most 6 variables and 10 rows");

  // All constraints as rows g^T x >= h.
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
    rows.emplace_back(p.A.row(i).transpose());
    rhs.push_back(p.b(i));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(p.lower(j))) {
      rows.emplace_back(Eigen::VectorXd::Unit(n, j));
      rhs.push_back(p.lower(j));
    }
    if (std::isfinite(p.upper(j))) {
      rows.emplace_back(-Eigen::VectorXd::Unit(n, j));
      rhs.push_back(-p.upper(j));
    }
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  auto feasible = [&](const Eigen::VectorXd& x) {
    for (Eigen::Index i = 0; i < r; ++i) {
      const double tol = 1e-9 * (1.0 + std::abs(rhs[static_cast<std::size_t>(i)]) + rows[static_cast<std::size_t>(i)].cwiseAbs().sum() * x.cwiseAbs().maxCoeff());
      if (rows[static_cast<std::size_t>(i)].dot(x) < rhs[static_cast<std::size_t>(i)] - tol) return false;
    }
    return true;
  };

  // Visit every size-`size` subset of the rows.
  auto for_subsets = [&](Eigen::Index size, auto&& fn) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(size));
    auto rec = [&](auto&& self, Eigen::Index pos, Eigen::Index from) -> void {
      if (pos == size) {
        fn(idx);
        return;
      }
      for (Eigen::Index i = from; i < r; ++i) {
        idx[static_cast<std::size_t>(pos)] = i;
        self(self, pos + 1, i + 1);
      }
    };
    rec(rec, 0, 0);
  };

  LpSolution best;
  best.status = LpStatus::infeasible;
  best.objective = kInf;
  best.x = Eigen::VectorXd::Zero(n);

  if (n == 0) {
    best.status = LpStatus::optimal;
    best.objective = 0.0;
    for (Eigen::Index i = 0; i < r; ++i)
      if (rhs[static_cast<std::size_t>(i)] > 0.0) best.status = LpStatus::infeasible;
    return best;
  }

  for_subsets(n, [&](const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd m(n, n);
    Eigen::VectorXd b(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      m.row(k) = rows[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].transpose();
      b(k) = rhs[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (lu.rank() < n) return;
    const Eigen::VectorXd x = lu.solve(b);
    if (!feasible(x)) return;
    const double obj = p.c.dot(x);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = x;
      best.status = LpStatus::optimal;
    }
  });
  if (best.status == LpStatus::infeasible) {
    // Either empty, or feasible without vertices; only the former is supported.
    bool pointed = false;
    for_subsets(n, [&](const std::vector<Eigen::Index>& idx) {
      Eigen::MatrixXd m(n, n);
      for (Eigen::Index k = 0; k < n; ++k) m.row(k) = rows[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].transpose();
      if (Eigen::FullPivLU<Eigen::MatrixXd>(m).rank() == n) pointed = true;
    });
    if (!pointed) throw std::invalid_argument("enumerate_vertices_oracle: constraint set has no vertices");
    return best;
  }

  // Extreme rays of the recession cone {d : G d >= 0}: one-dimensional null
  // spaces of n-1 active rows.
  bool unbounded = false;
  auto check_ray = [&](const Eigen::VectorXd& d) {
    if (p.c.dot(d) >= -1e-12) return;
    for (Eigen::Index i = 0; i < r; ++i)
      if (rows[static_cast<std::size_t>(i)].dot(d) < -1e-12) return;
    unbounded = true;
  };
  if (n == 1) {
    check_ray(Eigen::VectorXd::Ones(1));
    check_ray(-Eigen::VectorXd::Ones(1));
  } else {
    for_subsets(n - 1, [&](const std::vector<Eigen::Index>& idx) {
      Eigen::MatrixXd m(n - 1, n);
      for (Eigen::Index k = 0; k < n - 1; ++k) m.row(k) = rows[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].transpose();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
      if (lu.rank() != n - 1) return;
      Eigen::VectorXd d = lu.kernel().col(0);
      d /= d.cwiseAbs().maxCoeff();
      check_ray(d);
      check_ray(-d);
    });
  }
  if (unbounded) {
    best.status = LpStatus::unbounded;
    best.objective = -kInf;
  }
  return best;
}

}  // namespace utopia
