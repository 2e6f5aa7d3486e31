#pragma once

// Non-LP programs behind the aggregation and kernel bands.
//
// solve_qc:  minimize 1^T F a  over a >= 0, beta
//            s.t.     F_i a >= (y_i - M_i beta)^2   for every row i
//            (linear objective, jointly convex quadratic constraints;
//             log-barrier path following with damped Newton steps)
//
// solve_psd: minimize tr(K B K)  over B = V V^T
//            s.t.     <K_i, B K_i> >= s_i,  tr(K B) <= r
//            (Burer-Monteiro factorization, augmented Lagrangian with an
//             L-BFGS inner solver)

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "utopia/lp.hpp"
#include "utopia/rng.hpp"

namespace utopia {

class ConvexSolverError : public std::runtime_error {
 public:
  ConvexSolverError(const std::string& what, double violation)
      : std::runtime_error(what + " (max violation " + std::to_string(violation) + ")"), max_violation(violation) {}
  double max_violation;
};

//------------------------------------------------------------------------------
// Quadratically constrained aggregation

struct QcProgram {
  Eigen::MatrixXd F;  // n x K width candidate evaluations, entries >= 0
  Eigen::MatrixXd M;  // n x L mean candidate evaluations (L may be 0)
  Eigen::VectorXd y;

  void validate() const {
    const auto n = y.size();
    if (F.rows() != n || M.rows() != n) throw std::invalid_argument("QcProgram: row counts differ");
    if (F.cols() < 1) throw std::invalid_argument("QcProgram: need at least one width candidate");
    if (!F.allFinite() || !M.allFinite() || !y.allFinite()) throw std::invalid_argument("QcProgram: non-finite data");
    if ((F.array() < 0.0).any()) throw std::invalid_argument("QcProgram: width evaluations must be >= 0");
  }
};

struct QcResult {
  Eigen::VectorXd a;
  Eigen::VectorXd beta;
  double objective = 0.0;       // sum_i F_i a
  double max_violation = 0.0;   // max_i ((y_i - M_i beta)^2 - F_i a)^+
  double gap_bound = 0.0;       // barrier duality-gap bound on the objective
  int newton_steps = 0;
};

struct QcOptions {
  double gap_tol = 1e-8;  // relative to max(1, scaled objective)
  double barrier_growth = 10.0;
  int max_newton_steps = 2000;
};

inline QcResult solve_qc(const QcProgram& p, const QcOptions& opt = {}) {
  p.validate();
  const Eigen::Index n = p.y.size();
  const Eigen::Index K = p.F.cols();
  const Eigen::Index L = p.M.cols();

  QcResult res;
  res.a = Eigen::VectorXd::Zero(K);
  res.beta = Eigen::VectorXd::Zero(L);
  if (n == 0) return res;

  // Scaling: a_j = ys^2 * at_j / fc_j, beta_l = ys * bt_l / mc_l.
  const double ys = p.y.cwiseAbs().maxCoeff();
  if (ys == 0.0) return res;  // beta = 0 leaves zero residuals

  std::vector<Eigen::Index> fcols, mcols;
  Eigen::VectorXd fc(K), mc(L);
  for (Eigen::Index j = 0; j < K; ++j) {
    fc(j) = p.F.col(j).maxCoeff();
    if (fc(j) > 0.0) fcols.push_back(j);
  }
  for (Eigen::Index l = 0; l < L; ++l) {
    mc(l) = p.M.col(l).cwiseAbs().maxCoeff();
    if (mc(l) > 0.0) mcols.push_back(l);
  }
  const auto k = static_cast<Eigen::Index>(fcols.size());
  const auto ml = static_cast<Eigen::Index>(mcols.size());
  Eigen::MatrixXd F(n, k), M(n, ml);
  for (Eigen::Index j = 0; j < k; ++j) F.col(j) = p.F.col(fcols[static_cast<std::size_t>(j)]) / fc(fcols[static_cast<std::size_t>(j)]);
  for (Eigen::Index l = 0; l < ml; ++l) M.col(l) = p.M.col(mcols[static_cast<std::size_t>(l)]) / mc(mcols[static_cast<std::size_t>(l)]);
  const Eigen::VectorXd y = p.y / ys;

  // Strictly feasible start from the most uniformly positive column.
  Eigen::Index best = -1;
  double best_min = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double mn = F.col(j).minCoeff();
    if (mn > best_min) {
      best_min = mn;
      best = j;
    }
  }
  if (best < 0) throw ConvexSolverError("solve_qc: cannot initialize, no strictly positive width candidate", 0.0);

  const Eigen::Index nv = k + ml;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(nv);
  v.head(k).setConstant(1.0);
  v(best) = (y.array().square() / F.col(best).array()).maxCoeff() + 1.0;

  const Eigen::VectorXd colsum = F.colwise().sum().transpose();
  const double m_cons = static_cast<double>(n + k);

  auto slack = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g, Eigen::VectorXd& r) {
    r = y - M * u.tail(ml);
    g = F * u.head(k) - r.cwiseProduct(r);
  };
  auto barrier = [&](const Eigen::VectorXd& u, double t, bool& ok) {
    Eigen::VectorXd g, r;
    slack(u, g, r);
    ok = (g.array() > 0.0).all() && (u.head(k).array() > 0.0).all();
    if (!ok) return kInf;
    return t * colsum.dot(u.head(k)) - g.array().log().sum() - u.head(k).array().log().sum();
  };

  double obj0 = colsum.dot(v.head(k));
  double t = m_cons / std::max(obj0, 1e-12);
  int steps = 0;
  Eigen::VectorXd g, r, grad(nv);
  Eigen::MatrixXd H(nv, nv);
  for (;;) {
    // Centering.
    for (int inner = 0;; ++inner) {
      if (++steps > opt.max_newton_steps) {
        slack(v, g, r);
        throw ConvexSolverError("solve_qc: Newton iteration cap reached", std::max(0.0, -g.minCoeff()) * ys * ys);
      }
      slack(v, g, r);
      const Eigen::VectorXd ig = g.cwiseInverse();
      grad.head(k) = t * colsum - F.transpose() * ig - v.head(k).cwiseInverse();
      grad.tail(ml) = -2.0 * M.transpose() * r.cwiseProduct(ig);

      // Rows of the constraint Jacobian: (F_i, 2 r_i M_i).
      Eigen::MatrixXd J(n, nv);
      J.leftCols(k) = F;
      J.rightCols(ml) = (2.0 * r).asDiagonal() * M;
      H.noalias() = J.transpose() * ig.cwiseProduct(ig).asDiagonal() * J;
      H.bottomRightCorner(ml, ml).noalias() += 2.0 * M.transpose() * ig.asDiagonal() * M;
      H.topLeftCorner(k, k).diagonal() += v.head(k).cwiseInverse().cwiseAbs2();
      H.diagonal().array() += 1e-13 * std::max(1.0, H.diagonal().maxCoeff());

      Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      const Eigen::VectorXd dir = -ldlt.solve(grad);
      const double dec = -grad.dot(dir);
      if (!dir.allFinite()) throw ConvexSolverError("solve_qc: singular Newton system", std::max(0.0, -g.minCoeff()) * ys * ys);
      if (dec / 2.0 <= 1e-10) break;

      bool ok = false;
      const double f0 = barrier(v, t, ok);
      double step = 1.0;
      double f1 = barrier(v + step * dir, t, ok);
      while ((!ok || f1 > f0 - 0.25 * step * dec) && step > 1e-14) {
        step *= 0.5;
        f1 = barrier(v + step * dir, t, ok);
      }
      if (step <= 1e-14 || !ok) {
        // Round-off floor: the decrement is already tiny relative to the barrier.
        if (dec <= 1e-6) break;
        throw ConvexSolverError("solve_qc: line search stalled", std::max(0.0, -g.minCoeff()) * ys * ys);
      }
      // Past this point Armijo compares round-off: the barrier value is
      // large at high t, so a tiny decrement no longer moves it.
      if (dec <= 1e-6 && f0 - f1 <= 1e-12 * std::abs(f0)) break;
      v += step * dir;
    }
    const double obj = colsum.dot(v.head(k));
    if (m_cons / t <= opt.gap_tol * std::max(1.0, obj)) break;
    t *= opt.barrier_growth;
  }

  for (Eigen::Index j = 0; j < k; ++j) {
    const auto col = fcols[static_cast<std::size_t>(j)];
    res.a(col) = v(j) * ys * ys / fc(col);
  }
  for (Eigen::Index l = 0; l < ml; ++l) {
    const auto col = mcols[static_cast<std::size_t>(l)];
    res.beta(col) = v(k + l) * ys / mc(col);
  }
  const Eigen::VectorXd resid = p.y - p.M * res.beta;
  const Eigen::VectorXd cover = p.F * res.a - resid.cwiseAbs2();
  res.objective = p.F.colwise().sum().dot(res.a.transpose());
  res.max_violation = std::max(0.0, -cover.minCoeff());
  res.gap_bound = m_cons / t * ys * ys;
  res.newton_steps = steps;
  return res;
}

//------------------------------------------------------------------------------
// Kernel PSD program

struct PsdProgram {
  Eigen::MatrixXd K;
  Eigen::VectorXd s;
  double trace_budget = 0.0;

  void validate() const {
    if (K.rows() != K.cols() || K.rows() != s.size()) throw std::invalid_argument("PsdProgram: dimension mismatch");
    if (!K.allFinite() || !s.allFinite()) throw std::invalid_argument("PsdProgram: non-finite data");
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw std::invalid_argument("PsdProgram: K must be symmetric");
    if ((s.array() < 0.0).any()) throw std::invalid_argument("PsdProgram: targets must be >= 0");
    if (!(trace_budget > 0.0)) throw std::invalid_argument("PsdProgram: trace budget must be > 0");
  }

  /// 2 * mean(s) * n / mean(diag K), or 1 when every target is zero.
  static double default_trace_budget(const Eigen::MatrixXd& K, const Eigen::VectorXd& s) {
    const double md = K.diagonal().mean();
    const double r = 2.0 * s.sum() / std::max(md, 1e-300);
    return r > 0.0 ? r : 1.0;
  }
};

enum class PsdStatus { optimal, infeasible };

struct PsdResult {
  PsdStatus status = PsdStatus::optimal;
  Eigen::MatrixXd V;  // B = V V^T
  double objective = 0.0;  // tr(K B K)
  double trace = 0.0;      // tr(K B)
  double max_violation = 0.0;  // max_i (s_i - <K_i, B K_i>)^+ / max(1, s_i)
  int outer_iterations = 0;

  Eigen::MatrixXd B() const { return V * V.transpose(); }
};

struct PsdOptions {
  double jitter = 1e-10;
  double feas_tol = 1e-8;
  int max_outer = 60;
  int max_inner = 3000;
  std::uint64_t seed = 0x5eed;
};

namespace psd_detail {

// Minimizes a smooth function by limited-memory BFGS with Armijo backtracking.
template <class Fn>
double lbfgs(Fn&& fg, Eigen::VectorXd& x, double grad_tol, int max_iter) {
  constexpr int kMemory = 10;
  std::deque<Eigen::VectorXd> S, Y;
  Eigen::VectorXd g;
  double f = fg(x, g);
  for (int it = 0; it < max_iter; ++it) {
    if (g.cwiseAbs().maxCoeff() <= grad_tol) break;
    Eigen::VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      const double rho = 1.0 / Y[static_cast<std::size_t>(i)].dot(S[static_cast<std::size_t>(i)]);
      alpha[static_cast<std::size_t>(i)] = rho * S[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * Y[static_cast<std::size_t>(i)];
    }
    double gamma = 1.0 / std::max(1.0, g.norm());
    if (!S.empty()) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
    q *= gamma;
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double rho = 1.0 / Y[i].dot(S[i]);
      const double b = rho * Y[i].dot(q);
      q += (alpha[i] - b) * S[i];
    }
    Eigen::VectorXd d = -q;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      d = -g / std::max(1.0, g.norm());
      slope = g.dot(d);
    }
    double step = 1.0;
    Eigen::VectorXd xn, gn;
    double fn = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * d;
      fn = fg(xn, gn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    if (!(fn <= f + 1e-4 * step * slope)) break;  // no further progress possible
    Eigen::VectorXd sv = xn - x, yv = gn - g;
    if (sv.dot(yv) > 1e-12 * sv.norm() * yv.norm()) {
      S.push_back(std::move(sv));
      Y.push_back(std::move(yv));
      if (S.size() > kMemory) {
        S.pop_front();
        Y.pop_front();
      }
    }
    x = std::move(xn);
    g = std::move(gn);
    f = fn;
  }
  return f;
}

// Largest y's / lambda_max(D K D) over a few fixed choices of y, with D = diag(sqrt(y)).
inline double infeasibility_bound(const Eigen::MatrixXd& K, const Eigen::VectorXd& s) {
  const Eigen::Index n = s.size();
  double best = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (K(i, i) > 0.0) best = std::max(best, s(i) / K(i, i));
  auto try_weights = [&](const Eigen::VectorXd& y) {
    const Eigen::VectorXd d = y.cwiseSqrt();
    const Eigen::MatrixXd M = d.asDiagonal() * K * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    if (lmax > 0.0) best = std::max(best, y.dot(s) / lmax);
  };
  try_weights(Eigen::VectorXd::Ones(n));
  try_weights(s);
  try_weights(s.cwiseAbs2());
  return best;
}

}  // namespace psd_detail

inline PsdResult solve_psd(const PsdProgram& p, std::size_t rank, const PsdOptions& opt = {}) {
  p.validate();
  if (rank < 1) throw std::invalid_argument("solve_psd: rank must be >= 1");
  const Eigen::Index n = p.s.size();
  const auto rk = static_cast<Eigen::Index>(rank);
  PsdResult res;
  res.V = Eigen::MatrixXd::Zero(n, rk);
  if (n == 0) return res;

  const Eigen::MatrixXd K = p.K + opt.jitter * Eigen::MatrixXd::Identity(n, n);
  const double ss = p.s.maxCoeff();
  if (ss == 0.0) return res;
  const Eigen::VectorXd s = p.s / ss;
  const double r = p.trace_budget / ss;

  // Dual certificate: for y >= 0 and D = diag(sqrt(y)), every feasible B has
  // y's <= sum_i y_i <K_i, B K_i> <= lambda_max(D K D) tr(K B) <= lambda_max(D K D) r.
  const double cert = psd_detail::infeasibility_bound(K, s);
  if (cert > r * (1.0 + 1e-12)) {
    res.status = PsdStatus::infeasible;
    res.max_violation = (cert - r) * ss;
    return res;
  }
  // Diagonal B: cheapest trace over diagonal feasible points, by LP.
  Eigen::VectorXd diag_b;
  {
    LpProblem lp(K.diagonal(), K.cwiseAbs2(), s);
    const auto sol = solve_lp(lp);
    if (sol.status == LpStatus::optimal) diag_b = sol.x.cwiseMax(0.0);
  }

  // Start: the diagonal point restricted to its `rank` largest entries plus a
  // small deterministic perturbation, then scaled toward the targets.
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, rk);
  {
    RngState rng(opt.seed);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < rk; ++c) V(i, c) = 0.1 * rng.next_gaussian();
    if (diag_b.size() == n) {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return diag_b(a) > diag_b(b); });
      for (Eigen::Index c = 0; c < std::min(rk, n); ++c) {
        const auto i = order[static_cast<std::size_t>(c)];
        V(i, c) += std::sqrt(diag_b(i));
      }
    }
    const Eigen::MatrixXd U = K * V;
    const double cur = U.rowwise().squaredNorm().mean();
    if (cur > 0.0) V *= std::sqrt(s.mean() / cur);
  }

  Eigen::VectorXd lam = Eigen::VectorXd::Zero(n);
  double lam0 = 0.0;
  double rho = 10.0;
  double prev_viol = kInf;
  double grad_tol = 1e-3;

  auto violations = [&](const Eigen::MatrixXd& Vm, double& worst) {
    const Eigen::MatrixXd U = K * Vm;
    const Eigen::VectorXd c = U.rowwise().squaredNorm() - s;
    const double c0 = r - (Vm.cwiseProduct(U)).sum();
    worst = std::max(0.0, -c0);
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, -c(i) / std::max(1.0, s(i)));
    return std::pair{c, c0};
  };

  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(V.data(), n * rk);
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    res.outer_iterations = outer + 1;
    auto fg = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& grad) {
      const Eigen::Map<const Eigen::MatrixXd> Vm(xv.data(), n, rk);
      const Eigen::MatrixXd U = K * Vm;
      const Eigen::VectorXd rowsq = U.rowwise().squaredNorm();
      const Eigen::VectorXd c = rowsq - s;
      const double c0 = r - Vm.cwiseProduct(U).sum();
      const Eigen::VectorXd pi = (lam - rho * c).cwiseMax(0.0);
      const double pi0 = std::max(0.0, lam0 - rho * c0);
      double f = rowsq.sum();
      f += ((pi.array().square() - lam.array().square()).sum() + pi0 * pi0 - lam0 * lam0) / (2.0 * rho);
      const Eigen::MatrixXd G = 2.0 * K * ((Eigen::VectorXd::Ones(n) - pi).asDiagonal() * U) + 2.0 * pi0 * U;
      grad = Eigen::Map<const Eigen::VectorXd>(G.data(), n * rk);
      return f;
    };
    psd_detail::lbfgs(fg, x, grad_tol, opt.max_inner);

    const Eigen::Map<const Eigen::MatrixXd> Vm(x.data(), n, rk);
    double viol = 0.0;
    auto [c, c0] = violations(Vm, viol);
    lam = (lam - rho * c).cwiseMax(0.0);
    lam0 = std::max(0.0, lam0 - rho * c0);
    if (viol <= opt.feas_tol && grad_tol <= 1e-7) break;
    if (viol > 0.25 * prev_viol) rho = std::min(rho * 10.0, 1e9);
    prev_viol = viol;
    grad_tol = std::max(grad_tol * 0.1, 1e-9);
  }

  V = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, rk);
  // Lift any residual shortfall by a uniform rescale, then audit the trace.
  {
    const Eigen::MatrixXd U = K * V;
    const Eigen::VectorXd rowsq = U.rowwise().squaredNorm();
    // Only shortfalls beyond a tenth of the reported tolerance are lifted.
    double lift = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double target = s(i) - 1e-6 * std::max(1.0, p.s(i)) / ss;
      if (target > 0.0 && rowsq(i) < target) lift = std::max(lift, target / std::max(rowsq(i), 1e-300));
    }
    V *= std::sqrt(lift);
  }
  double viol = 0.0;
  violations(V, viol);
  const Eigen::MatrixXd U = K * V;
  const double trace = V.cwiseProduct(U).sum();
  if (trace > r + 1e-6 / ss)
    throw ConvexSolverError("solve_psd: augmented Lagrangian did not reach the trace budget (feasibility unproven)",
                            (trace - r) * ss);

  res.V = V * std::sqrt(ss);
  const Eigen::MatrixXd Uo = K * res.V;
  res.objective = Uo.squaredNorm();
  res.trace = res.V.cwiseProduct(Uo).sum();
  res.max_violation = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    res.max_violation = std::max(res.max_violation, (p.s(i) - Uo.row(i).squaredNorm()) / std::max(1.0, p.s(i)));
  res.status = PsdStatus::optimal;
  return res;
}

}  // namespace utopia
