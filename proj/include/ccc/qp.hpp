#pragma once

// Dense convex QP solver:  min 1/2 x'Gx + a'x  s.t.  A_eq x = b_eq, A_in x >= b_in,
// with G strictly positive definite. Dual active-set method: start at the
// unconstrained (equality-constrained) optimum, add the most violated
// inequality, and take primal/dual steps until feasible. Equality rows stay
// active for the whole solve and their multipliers are unrestricted in sign.
// Primal infeasibility shows up as an unbounded dual step and is reported, not
// thrown; an iteration cap distinguishes non-convergence from infeasibility.
// The method is deterministic: ties in constraint selection break on the
// smallest row index.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ccc {

enum class QpStatus { Ok, Infeasible, NoConvergence };

struct QpProblem {
  Eigen::MatrixXd G;  // n x n, symmetric positive definite
  Eigen::VectorXd a;  // n
  Eigen::MatrixXd A_eq;  // m_eq x n (may be empty)
  Eigen::VectorXd b_eq;  // m_eq
  Eigen::MatrixXd A_in;  // m_in x n (may be empty), rows are A_in x >= b_in
  Eigen::VectorXd b_in;  // m_in

  Eigen::Index n() const { return G.rows(); }
};

struct QpResult {
  QpStatus status = QpStatus::Ok;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
};

namespace detail {

// Max-norm KKT residual: stationarity, primal feasibility, complementarity.
inline double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& lam_eq,
                           const Eigen::VectorXd& mu_in) {
  Eigen::VectorXd grad = qp.G * x + qp.a;
  if (qp.A_eq.rows() > 0) grad -= qp.A_eq.transpose() * lam_eq;
  if (qp.A_in.rows() > 0) grad -= qp.A_in.transpose() * mu_in;
  double r = grad.lpNorm<Eigen::Infinity>();
  if (qp.A_eq.rows() > 0)
    r = std::max(r, (qp.A_eq * x - qp.b_eq).lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < qp.A_in.rows(); ++i) {
    const double s = qp.A_in.row(i).dot(x) - qp.b_in(i);
    r = std::max(r, std::max(-s, 0.0));
    r = std::max(r, std::abs(mu_in(i) * s));
  }
  return r;
}

}  // namespace detail

inline QpResult solve_qp(const QpProblem& qp, double tol = 1e-8) {
  const Eigen::Index n = qp.n();
  if (qp.G.cols() != n || qp.a.size() != n)
    throw std::invalid_argument("solve_qp: inconsistent objective dimensions");
  if (qp.A_eq.rows() != qp.b_eq.size() || (qp.A_eq.rows() > 0 && qp.A_eq.cols() != n))
    throw std::invalid_argument("solve_qp: inconsistent equality dimensions");
  if (qp.A_in.rows() != qp.b_in.size() || (qp.A_in.rows() > 0 && qp.A_in.cols() != n))
    throw std::invalid_argument("solve_qp: inconsistent inequality dimensions");

  Eigen::LLT<Eigen::MatrixXd> llt(qp.G);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("solve_qp: G must be positive definite");

  const Eigen::Index m_eq = qp.A_eq.rows();
  const Eigen::Index m_in = qp.A_in.rows();
  const double inf = std::numeric_limits<double>::infinity();

  QpResult res;
  res.x = llt.solve(-qp.a);

  // Active set: equality rows first (permanent), then added inequality rows.
  std::vector<Eigen::Index> active;   // inequality row indices
  std::vector<double> mult;           // their multipliers (>= 0)

  // Normals of the permanent equality block.
  Eigen::MatrixXd Ne = qp.A_eq.transpose();  // n x m_eq

  auto solve_step = [&](const Eigen::VectorXd& cp, Eigen::VectorXd& z,
                        Eigen::VectorXd& r_eq, Eigen::VectorXd& r_in) {
    const Eigen::Index q_in = static_cast<Eigen::Index>(active.size());
    const Eigen::Index q = m_eq + q_in;
    Eigen::VectorXd Hc = llt.solve(cp);
    if (q == 0) {
      z = Hc;
      r_eq.resize(0);
      r_in.resize(0);
      return;
    }
    Eigen::MatrixXd N(n, q);
    if (m_eq > 0) N.leftCols(m_eq) = Ne;
    for (Eigen::Index j = 0; j < q_in; ++j)
      N.col(m_eq + j) = qp.A_in.row(active[static_cast<std::size_t>(j)]).transpose();
    Eigen::MatrixXd HN = llt.solve(N);
    Eigen::MatrixXd B = N.transpose() * HN;  // q x q, SPD for independent rows
    Eigen::VectorXd r = B.ldlt().solve(N.transpose() * Hc);
    z = Hc - HN * r;
    r_eq = r.head(m_eq);
    r_in = r.tail(q_in);
  };

  // Multipliers for the equality block, tracked alongside the inequality ones.
  Eigen::VectorXd lam_eq = Eigen::VectorXd::Zero(m_eq);

  // Bring equality rows in first, one at a time (dual steps unrestricted).
  const int max_iter = 50 * static_cast<int>(n + m_eq + m_in + 1);
  int iter = 0;

  if (m_eq > 0) {
    // Equality-constrained optimum via a single KKT solve.
    Eigen::MatrixXd HNe = llt.solve(Ne);
    Eigen::MatrixXd Be = Ne.transpose() * HNe;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Be);
    if (ldlt.info() != Eigen::Success)
      throw std::invalid_argument("solve_qp: dependent equality rows");
    lam_eq = ldlt.solve(qp.A_eq * res.x - qp.b_eq);
    // x = x_uncon - H Ne lam  gives A_eq x = b_eq.
    res.x -= HNe * lam_eq;
    lam_eq = -lam_eq;  // sign convention: grad = Gx + a - A_eq' lam - A_in' mu
    const double eq_res = m_eq > 0
        ? (qp.A_eq * res.x - qp.b_eq).lpNorm<Eigen::Infinity>()
        : 0.0;
    if (!std::isfinite(eq_res) || eq_res > 1e-6) {
      res.status = QpStatus::Infeasible;  // inconsistent equalities
      return res;
    }
  }

  while (true) {
    if (++iter > max_iter) {
      res.status = QpStatus::NoConvergence;
      return res;
    }
    // Most violated inequality; smallest index wins ties.
    Eigen::Index p = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < m_in; ++i) {
      const double s = qp.A_in.row(i).dot(res.x) - qp.b_in(i);
      if (s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0) break;  // primal feasible -> done

    Eigen::VectorXd cp = qp.A_in.row(p).transpose();
    double up = 0.0;  // multiplier of the incoming constraint
    while (true) {
      if (++iter > max_iter) {
        res.status = QpStatus::NoConvergence;
        return res;
      }
      Eigen::VectorXd z, r_eq, r_in;
      solve_step(cp, z, r_eq, r_in);
      const double czp = cp.dot(z);
      const bool has_primal = czp > 1e-12;

      // Partial step bound from active inequality multipliers.
      double t1 = inf;
      std::size_t drop = static_cast<std::size_t>(-1);
      for (std::size_t j = 0; j < active.size(); ++j) {
        const double rj = r_in(static_cast<Eigen::Index>(j));
        if (rj > 1e-12) {
          const double bound = std::max(0.0, mult[j]) / rj;
          if (bound < t1 - 1e-15) {
            t1 = bound;
            drop = j;
          }
        }
      }
      const double s_p = cp.dot(res.x) - qp.b_in(p);
      const double t2 = has_primal ? -s_p / czp : inf;
      const double t = std::min(t1, t2);
      if (t == inf) {
        res.status = QpStatus::Infeasible;  // dual unbounded along this normal
        return res;
      }
      if (has_primal) res.x += t * z;
      if (active.size() > 0)
        for (std::size_t j = 0; j < active.size(); ++j)
          mult[j] -= t * r_in(static_cast<Eigen::Index>(j));
      if (m_eq > 0) lam_eq -= t * r_eq;
      up += t;

      if (t == t2 && has_primal) {
        active.push_back(p);
        mult.push_back(up);
        break;
      }
      // Dual-only or partial step: drop the blocking constraint and retry.
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      mult.erase(mult.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m_in);
  for (std::size_t j = 0; j < active.size(); ++j) mu(active[j]) = mult[j];
  res.status = QpStatus::Ok;
  res.objective = 0.5 * res.x.dot(qp.G * res.x) + qp.a.dot(res.x);
  res.kkt_residual = detail::kkt_residual(qp, res.x, lam_eq, mu);
  res.iterations = iter;
  return res;
}

}  // namespace ccc
