#pragma once

// Dense-input linear programming by a homogeneous self-dual interior-point
// method with Mehrotra predictor-corrector steps.
//
//   minimize    c^T x
//   subject to  A x >= b,  lower <= x <= upper.
//
// Internally every constraint (including finite bounds) becomes a row of
// G x + s = h with s >= 0. The Newton systems reduce to the variable-space
// normal matrix G^T W G. Variables that never share a row with each other are
// eliminated by a diagonal Schur complement, so problems with one auxiliary
// variable per observation (pinball regression) factor a matrix whose size is
// the number of coupled variables only.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace utopia {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LpProblem {
  Eigen::VectorXd c;
  Eigen::MatrixXd A;  // rows are ">=" constraints
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  LpProblem() = default;

  /// Bounds default to [0, +inf).
  LpProblem(Eigen::VectorXd cost, Eigen::MatrixXd a, Eigen::VectorXd rhs)
      : c(std::move(cost)), A(std::move(a)), b(std::move(rhs)) {
    lower = Eigen::VectorXd::Zero(c.size());
    upper = Eigen::VectorXd::Constant(c.size(), kInf);
  }

  Eigen::Index num_vars() const { return c.size(); }
  Eigen::Index num_rows() const { return b.size(); }

  void validate() const {
    const auto m = c.size();
    if (A.cols() != m || A.rows() != b.size() || lower.size() != m || upper.size() != m)
      throw std::invalid_argument("LpProblem: inconsistent dimensions");
    if (!c.allFinite() || !A.allFinite() || !b.allFinite())
      throw std::invalid_argument("LpProblem: cost, matrix and right-hand side must be finite");
    for (Eigen::Index j = 0; j < m; ++j) {
      if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) == kInf || upper(j) == -kInf)
        throw std::invalid_argument("LpProblem: invalid bound on variable " + std::to_string(j));
    }
  }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  LpStatus status = LpStatus::infeasible;
  double max_primal_violation = 0.0;
  double max_dual_violation = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
};

/// Thrown when the interior-point iteration neither converges nor certifies
/// infeasibility within its budget.
class SolverStalled : public std::runtime_error {
 public:
  SolverStalled(const std::string& what, double primal_res, double dual_res, double gap)
      : std::runtime_error(what + " (primal residual " + std::to_string(primal_res) + ", dual residual " +
                           std::to_string(dual_res) + ", gap " + std::to_string(gap) + ")"),
        primal_residual(primal_res),
        dual_residual(dual_res),
        duality_gap(gap) {}
  double primal_residual, dual_residual, duality_gap;
};

struct LpOptions {
  double feas_tol = 1e-9;
  double gap_tol = 1e-9;
  double infeas_tol = 1e-9;
  int max_iterations = 200;
  int equilibration_passes = 10;
  // When round-off stops progress short of the tolerances above, the best
  // iterate is still accepted if it meets these.
  double reduced_feas_tol = 1e-6;
  double reduced_gap_tol = 1e-6;
  int stall_iterations = 10;
};

namespace lp_detail {

// G in compressed row form.
struct SparseRows {
  std::vector<std::size_t> start{0};
  std::vector<Eigen::Index> col;
  std::vector<double> val;

  std::size_t rows() const { return start.size() - 1; }
  void push(Eigen::Index j, double v) {
    col.push_back(j);
    val.push_back(v);
  }
  void end_row() { start.push_back(col.size()); }

  // y = G x
  void mul(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.resize(static_cast<Eigen::Index>(rows()));
    for (std::size_t i = 0; i < rows(); ++i) {
      double acc = 0.0;
      for (std::size_t k = start[i]; k < start[i + 1]; ++k) acc += val[k] * x(col[k]);
      y(static_cast<Eigen::Index>(i)) = acc;
    }
  }
  // y = G^T z
  void mul_t(const Eigen::VectorXd& z, Eigen::Index n, Eigen::VectorXd& y) const {
    y.setZero(n);
    for (std::size_t i = 0; i < rows(); ++i) {
      const double zi = z(static_cast<Eigen::Index>(i));
      for (std::size_t k = start[i]; k < start[i + 1]; ++k) y(col[k]) += val[k] * zi;
    }
  }
};

// Factorizes G^T diag(w) G + reg via a diagonal Schur complement on the
// "separable" variables (no two of them share a row).
class NormalSolver {
 public:
  NormalSolver(const SparseRows& g, Eigen::Index n) : g_(g), n_(n) {
    // Column counts drive the greedy choice: sparse columns first.
    std::vector<std::size_t> count(static_cast<std::size_t>(n), 0);
    for (std::size_t k = 0; k < g.col.size(); ++k) ++count[static_cast<std::size_t>(g.col[k])];
    std::vector<std::vector<std::size_t>> rows_of(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t k = g.start[i]; k < g.start[i + 1]; ++k) rows_of[static_cast<std::size_t>(g.col[k])].push_back(i);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return count[static_cast<std::size_t>(a)] < count[static_cast<std::size_t>(b)];
    });
    std::vector<char> row_taken(g.rows(), 0);
    is_diag_.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index j : order) {
      const auto& rs = rows_of[static_cast<std::size_t>(j)];
      // Single-entry rows (bounds) never couple variables.
      bool ok = true;
      for (std::size_t i : rs)
        if (g.start[i + 1] - g.start[i] > 1 && row_taken[i]) ok = false;
      // A separable variable only pays off when it is cheap to eliminate.
      if (ok && count[static_cast<std::size_t>(j)] * 4 <= g.rows() + 4) {
        is_diag_[static_cast<std::size_t>(j)] = 1;
        for (std::size_t i : rs)
          if (g.start[i + 1] - g.start[i] > 1) row_taken[i] = 1;
      }
    }
    pos_.assign(static_cast<std::size_t>(n), -1);
    for (Eigen::Index j = 0; j < n; ++j) {
      auto& list = is_diag_[static_cast<std::size_t>(j)] ? diag_ : rest_;
      pos_[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(list.size());
      list.push_back(j);
    }
  }

  std::size_t coupled_size() const { return rest_.size(); }

  bool factor(const Eigen::VectorXd& w, double reg) {
    const auto nd = static_cast<Eigen::Index>(diag_.size());
    const auto nr = static_cast<Eigen::Index>(rest_.size());
    mdd_.setZero(nd);
    mdr_.setZero(nd, nr);
    Eigen::MatrixXd mrr = Eigen::MatrixXd::Zero(nr, nr);
    std::vector<Eigen::Index> rpos;
    std::vector<double> rval;
    for (std::size_t i = 0; i < g_.rows(); ++i) {
      const double wi = w(static_cast<Eigen::Index>(i));
      Eigen::Index dj = -1;
      double dv = 0.0;
      rpos.clear();
      rval.clear();
      for (std::size_t k = g_.start[i]; k < g_.start[i + 1]; ++k) {
        const auto j = static_cast<std::size_t>(g_.col[k]);
        if (is_diag_[j]) {
          dj = pos_[j];
          dv = g_.val[k];
          mdd_(dj) += wi * dv * dv;
        } else {
          rpos.push_back(pos_[j]);
          rval.push_back(g_.val[k]);
        }
      }
      for (std::size_t a = 0; a < rpos.size(); ++a) {
        const double wa = wi * rval[a];
        if (dj >= 0) mdr_(dj, rpos[a]) += wa * dv;
        for (std::size_t b = 0; b <= a; ++b) mrr(rpos[a], rpos[b]) += wa * rval[b];
      }
    }
    double scale = 1.0;
    if (nd > 0) scale = std::max(scale, mdd_.maxCoeff());
    for (Eigen::Index j = 0; j < nr; ++j) scale = std::max(scale, mrr(j, j));
    const double eps = reg * scale;
    mdd_.array() += eps;
    schur_ = mrr.selfadjointView<Eigen::Lower>();
    schur_.diagonal().array() += eps;
    if (nd > 0) {
      const Eigen::MatrixXd scaled = mdd_.cwiseInverse().asDiagonal() * mdr_;
      schur_.noalias() -= mdr_.transpose() * scaled;
    }
    if (nr > 0) {
      llt_.compute(schur_);
      if (llt_.info() != Eigen::Success) return false;
    }
    return true;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
    const auto nd = static_cast<Eigen::Index>(diag_.size());
    const auto nr = static_cast<Eigen::Index>(rest_.size());
    Eigen::VectorXd rd(nd), rr(nr);
    for (Eigen::Index k = 0; k < nd; ++k) rd(k) = r(diag_[static_cast<std::size_t>(k)]);
    for (Eigen::Index k = 0; k < nr; ++k) rr(k) = r(rest_[static_cast<std::size_t>(k)]);
    Eigen::VectorXd xr(nr);
    if (nr > 0) {
      Eigen::VectorXd rhs = rr;
      if (nd > 0) rhs.noalias() -= mdr_.transpose() * rd.cwiseQuotient(mdd_);
      xr = llt_.solve(rhs);
    }
    Eigen::VectorXd xd(nd);
    if (nd > 0) {
      xd = rd;
      if (nr > 0) xd.noalias() -= mdr_ * xr;
      xd.array() /= mdd_.array();
    }
    Eigen::VectorXd x(n_);
    for (Eigen::Index k = 0; k < nd; ++k) x(diag_[static_cast<std::size_t>(k)]) = xd(k);
    for (Eigen::Index k = 0; k < nr; ++k) x(rest_[static_cast<std::size_t>(k)]) = xr(k);
    return x;
  }

 private:
  const SparseRows& g_;
  Eigen::Index n_;
  std::vector<char> is_diag_;
  std::vector<Eigen::Index> pos_;
  std::vector<Eigen::Index> diag_, rest_;
  Eigen::VectorXd mdd_;
  Eigen::MatrixXd mdr_;
  Eigen::MatrixXd schur_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = kInf;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

}  // namespace lp_detail

/// Solves `p`. Infeasible and unbounded problems are reported through the
/// status; failure to converge throws SolverStalled.
inline LpSolution solve_lp(const LpProblem& p, const LpOptions& opt = {}) {
  using namespace lp_detail;
  p.validate();
  const Eigen::Index n = p.num_vars();
  const Eigen::Index k = p.num_rows();

  // Ruiz equilibration of A: A_s = R A C, x = C x_s.
  Eigen::VectorXd rs = Eigen::VectorXd::Ones(k), cs = Eigen::VectorXd::Ones(n);
  {
    Eigen::MatrixXd as = p.A;
    for (int pass = 0; pass < opt.equilibration_passes && k > 0 && n > 0; ++pass) {
      Eigen::VectorXd rn = as.cwiseAbs().rowwise().maxCoeff();
      Eigen::VectorXd cn = as.cwiseAbs().colwise().maxCoeff().transpose();
      for (Eigen::Index i = 0; i < k; ++i) {
        const double f = rn(i) > 0.0 ? 1.0 / std::sqrt(rn(i)) : 1.0;
        rs(i) *= f;
        as.row(i) *= f;
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        const double f = cn(j) > 0.0 ? 1.0 / std::sqrt(cn(j)) : 1.0;
        cs(j) *= f;
        as.col(j) *= f;
      }
    }
  }

  // Build G x + s = h in scaled variables.
  SparseRows g;
  std::vector<double> hv;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = p.A(i, j);
      if (a != 0.0) g.push(j, -rs(i) * a * cs(j));
    }
    g.end_row();
    hv.push_back(-rs(i) * p.b(i));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(p.lower(j))) {
      g.push(j, -1.0);
      g.end_row();
      hv.push_back(-p.lower(j) / cs(j));
    }
    if (std::isfinite(p.upper(j))) {
      g.push(j, 1.0);
      g.end_row();
      hv.push_back(p.upper(j) / cs(j));
    }
  }
  const auto m = static_cast<Eigen::Index>(g.rows());
  const Eigen::VectorXd h = Eigen::Map<Eigen::VectorXd>(hv.data(), m);
  const Eigen::VectorXd c = p.c.cwiseProduct(cs);

  LpSolution sol;
  auto finish = [&](const Eigen::VectorXd& xs, LpStatus status) {
    sol.status = status;
    sol.x = xs.cwiseProduct(cs);
    sol.objective = p.c.dot(sol.x);
    double viol = 0.0;
    if (k > 0) viol = std::max(viol, (p.b - p.A * sol.x).maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::isfinite(p.lower(j))) viol = std::max(viol, p.lower(j) - sol.x(j));
      if (std::isfinite(p.upper(j))) viol = std::max(viol, sol.x(j) - p.upper(j));
    }
    sol.max_primal_violation = std::max(0.0, viol);
    return sol;
  };

  if (m == 0) {
    // No constraints at all: bounded only if c == 0.
    if (c.cwiseAbs().maxCoeff() > 0.0) {
      sol.status = LpStatus::unbounded;
      sol.x = Eigen::VectorXd::Zero(n);
      return sol;
    }
    return finish(Eigen::VectorXd::Zero(n), LpStatus::optimal);
  }

  NormalSolver ns(g, n);
  const double reg = 1e-14;

  // Initial point: least-squares primal, least-norm dual, shifted into the cone.
  Eigen::VectorXd x(n), s(m), z(m);
  {
    if (!ns.factor(Eigen::VectorXd::Ones(m), 1e-10)) throw SolverStalled("solve_lp: initial factorization failed", 0, 0, 0);
    Eigen::VectorXd gth;
    g.mul_t(h, n, gth);
    x = ns.solve(gth);
    Eigen::VectorXd gx;
    g.mul(x, gx);
    s = h - gx;
    const Eigen::VectorXd y = ns.solve(-c);
    g.mul(y, z);
    const double ap = -s.minCoeff();
    if (ap >= 0.0) s.array() += 1.0 + ap;
    const double ad = -z.minCoeff();
    if (ad >= 0.0) z.array() += 1.0 + ad;
  }
  double tau = 1.0, kappa = 1.0;

  const double hnorm = std::max(1.0, h.cwiseAbs().maxCoeff());
  const double cnorm = std::max(1.0, c.cwiseAbs().maxCoeff());

  Eigen::VectorXd gx, gtz, rx, rz, tmp;
  double pres = kInf, dres = kInf, gap = kInf;
  struct Best {
    double score = kInf, pres = kInf, dres = kInf, gap = kInf, relgap = kInf;
    Eigen::VectorXd x;
    int it = 0;
  } best;
  auto accept_best = [&]() -> std::optional<LpSolution> {
    if (best.score == kInf || best.pres > opt.reduced_feas_tol || best.dres > opt.reduced_feas_tol ||
        std::min(best.gap, best.relgap) > opt.reduced_gap_tol)
      return std::nullopt;
    sol.complementarity = best.gap;
    sol.max_dual_violation = best.dres * cnorm;
    sol.iterations = best.it;
    return finish(best.x, LpStatus::optimal);
  };
  for (int it = 0; it < opt.max_iterations; ++it) {
    sol.iterations = it;
    g.mul(x, gx);
    g.mul_t(z, n, gtz);
    rx = gtz + c * tau;
    rz = s + gx - h * tau;
    const double cx = c.dot(x), hz = h.dot(z);
    const double rtau = kappa + cx + hz;
    const double mu = (s.dot(z) + tau * kappa) / static_cast<double>(m + 1);

    pres = rz.cwiseAbs().maxCoeff() / tau / hnorm;
    dres = rx.cwiseAbs().maxCoeff() / tau / cnorm;
    gap = s.dot(z) / (tau * tau);
    const double pcost = cx / tau, dcost = -hz / tau;
    const double relgap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));

    if (pres < opt.feas_tol && dres < opt.feas_tol && (gap < opt.gap_tol || relgap < opt.gap_tol)) {
      sol.complementarity = gap;
      sol.max_dual_violation = dres * cnorm;
      return finish(x / tau, LpStatus::optimal);
    }
    const double score = std::max({pres, dres, std::min(gap, relgap)});
    if (score < best.score) {
      best = {score, pres, dres, gap, relgap, x / tau, it};
    } else if (it - best.it >= opt.stall_iterations) {
      if (auto s_best = accept_best()) return *s_best;
      throw SolverStalled("solve_lp: no progress", pres, dres, gap);
    }
    // Infeasibility certificates (on the unnormalized iterate).
    if (hz < 0.0) {
      const double cert = gtz.cwiseAbs().maxCoeff() / (-hz);
      if (cert < opt.infeas_tol) {
        sol.x = Eigen::VectorXd::Zero(n);
        sol.status = LpStatus::infeasible;
        return sol;
      }
    }
    if (cx < 0.0) {
      const double cert = (gx + s).cwiseAbs().maxCoeff() / (-cx);
      if (cert < opt.infeas_tol) {
        sol.x = x.cwiseProduct(cs);
        sol.status = LpStatus::unbounded;
        return sol;
      }
    }

    const Eigen::VectorXd w = z.cwiseQuotient(s);
    if (!ns.factor(w, reg) && !ns.factor(w, reg * 1e4)) {
      if (auto s_best = accept_best()) return *s_best;
      throw SolverStalled("solve_lp: normal matrix factorization failed", pres, dres, gap);
    }

    // Solve [0 G^T; G -W^{-1}] [dx; dz] = [r1; r2].
    auto kkt = [&](const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx, Eigen::VectorXd& dz) {
      Eigen::VectorXd wr2 = w.cwiseProduct(r2);
      Eigen::VectorXd rhs;
      g.mul_t(wr2, n, rhs);
      rhs += r1;
      dx = ns.solve(rhs);
      // One refinement step against the unregularized operator.
      Eigen::VectorXd gdx, mdx;
      g.mul(dx, gdx);
      Eigen::VectorXd wgdx = w.cwiseProduct(gdx);
      g.mul_t(wgdx, n, mdx);
      dx += ns.solve(rhs - mdx);
      g.mul(dx, gdx);
      dz = w.cwiseProduct(gdx - r2);
    };

    // Direction for the tau column: RHS (-c, h).
    Eigen::VectorXd dx2, dz2;
    kkt(-c, h, dx2, dz2);
    const double den_base = c.dot(dx2) + h.dot(dz2);

    auto direction = [&](double eta, const Eigen::VectorXd& ds_rhs, double dk_rhs, Eigen::VectorXd& dx,
                         Eigen::VectorXd& dz, Eigen::VectorXd& ds, double& dtau, double& dkappa) {
      // s o dz + z o ds = ds_rhs ; kappa dtau + tau dkappa = dk_rhs
      Eigen::VectorXd dx1, dz1;
      Eigen::VectorXd r2 = -eta * rz - ds_rhs.cwiseQuotient(z);
      kkt(-eta * rx, r2, dx1, dz1);
      dtau = (-eta * rtau - dk_rhs / tau - c.dot(dx1) - h.dot(dz1)) / (den_base - kappa / tau);
      dx = dx1 + dtau * dx2;
      dz = dz1 + dtau * dz2;
      ds = (ds_rhs - s.cwiseProduct(dz)).cwiseQuotient(z);
      dkappa = (dk_rhs - kappa * dtau) / tau;
    };

    auto step_to_boundary = [&](const Eigen::VectorXd& ds, const Eigen::VectorXd& dz, double dtau, double dkappa) {
      double a = std::min(max_step(s, ds), max_step(z, dz));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    Eigen::VectorXd dxa, dza, dsa;
    double dta = 0.0, dka = 0.0;
    direction(1.0, -s.cwiseProduct(z), -tau * kappa, dxa, dza, dsa, dta, dka);
    const double aa = std::min(1.0, step_to_boundary(dsa, dza, dta, dka));
    const double sigma = std::pow(1.0 - aa, 3);

    // Corrector.
    Eigen::VectorXd dx, dz, ds;
    double dt = 0.0, dk = 0.0;
    Eigen::VectorXd comp = Eigen::VectorXd::Constant(m, sigma * mu) - s.cwiseProduct(z) - dsa.cwiseProduct(dza);
    direction(1.0 - sigma, comp, sigma * mu - tau * kappa - dta * dka, dx, dz, ds, dt, dk);
    double a = std::min(1.0, 0.99 * step_to_boundary(ds, dz, dt, dk));
    if (!(a > 1e-14) || !dx.allFinite()) {
      if (auto s_best = accept_best()) return *s_best;
      throw SolverStalled("solve_lp: step length collapsed", pres, dres, gap);
    }

    x += a * dx;
    s += a * ds;
    z += a * dz;
    tau += a * dt;
    kappa += a * dk;

    // Keep the embedding well scaled.
    const double norm = std::max({1.0, tau, kappa}) ;
    if (norm > 1e8) {
      x /= norm;
      s /= norm;
      z /= norm;
      tau /= norm;
      kappa /= norm;
    }
  }
  if (auto s_best = accept_best()) return *s_best;
  throw SolverStalled("solve_lp: iteration cap reached", pres, dres, gap);
}

}  // namespace utopia
