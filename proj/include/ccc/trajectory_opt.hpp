#pragma once

// Longitudinal and lateral trajectory optimization. Each problem is a small
// dense QP over the per-interval control values: states are eliminated through
// the forward-Euler double-integrator rollup (the same discretization the
// plant uses), costs are rectangle-rule sums, and headway constraints against
// fixed neighbor trajectories are linear rows per grid node.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ccc/qp.hpp"
#include "ccc/scenario.hpp"

namespace ccc {

struct CostWeights {
  double alpha_t = 0.6;    // weight on maneuver duration
  double alpha_u = 0.4;    // weight on control energy (as alpha_u/2 * u^2)
  double alpha_v = 0.5;    // weight on terminal speed disruption
  double alpha_phi = 50.0; // weight on steering energy (as alpha_phi/2 * phi^2)
};

enum class SolveStatus { Ok, Infeasible, NoConvergence };
enum class DisruptionMode { Terminal, Running };

// Discrete trajectory: n controls (one per interval), n+1 states.
struct Trajectory {
  double t_start = 0.0;
  double dt = 0.0;
  std::vector<double> u;  // size n
  std::vector<double> x;  // size n+1
  std::vector<double> v;  // size n+1
  double cost = 0.0;

  std::size_t intervals() const { return u.size(); }
  double t_end() const { return t_start + dt * static_cast<double>(u.size()); }
  double time_at(std::size_t k) const { return t_start + dt * static_cast<double>(k); }
};

// Euler rollup of a control sequence from (x0, v0).
inline Trajectory rollout(double x0, double v0, double t_start, double dt,
                          std::vector<double> u) {
  Trajectory tr;
  tr.t_start = t_start;
  tr.dt = dt;
  tr.u = std::move(u);
  tr.x.resize(tr.u.size() + 1);
  tr.v.resize(tr.u.size() + 1);
  tr.x[0] = x0;
  tr.v[0] = v0;
  for (std::size_t k = 0; k < tr.u.size(); ++k) {
    tr.x[k + 1] = tr.x[k] + tr.v[k] * dt;
    tr.v[k + 1] = tr.v[k] + tr.u[k] * dt;
  }
  return tr;
}

// Sampled point of the discrete path (piecewise-linear x and v, ZOH control).
struct TrajectorySample {
  double x = 0.0;
  double v = 0.0;
  double u = 0.0;
};

// Evaluate a trajectory at an arbitrary time; holds speed beyond the horizon.
inline TrajectorySample sample(const Trajectory& tr, double t) {
  TrajectorySample s;
  const std::size_t n = tr.intervals();
  if (n == 0 || tr.dt <= 0.0) {
    s.x = tr.x.empty() ? 0.0 : tr.x.front();
    s.v = tr.v.empty() ? 0.0 : tr.v.front();
    return s;
  }
  double rel = (t - tr.t_start) / tr.dt;
  if (rel <= 0.0) {
    s.x = tr.x[0] - tr.v[0] * (tr.t_start - t);
    s.v = tr.v[0];
    s.u = tr.u[0];
    return s;
  }
  if (rel >= static_cast<double>(n)) {
    const double over = t - tr.t_end();
    s.x = tr.x[n] + tr.v[n] * over;
    s.v = tr.v[n];
    s.u = 0.0;
    return s;
  }
  // Snap to the grid so a query at a node boundary (up to rounding dust)
  // reads that node's interval, not the previous one.
  auto k = static_cast<std::size_t>(rel + 1e-9);
  if (k >= n) k = n - 1;
  const double local = t - tr.time_at(k);
  s.x = tr.x[k] + tr.v[k] * local;
  s.v = tr.v[k] + tr.u[k] * local;
  s.u = tr.u[k];
  return s;
}

// Control energy metric sum(u^2 dt), unweighted.
inline double energy_of(const Trajectory& tr) {
  double e = 0.0;
  for (double u : tr.u) e += u * u * tr.dt;
  return e;
}

enum class TerminalSpeed { Free, HardBand, Equality, Soft };

// Extra planned headway per unit of closing speed (seconds). Receding-horizon
// replans start from the previous plan's interior states; without a buffer the
// optimizer may park those states exactly on the gap bound while still closing
// fast, and the next solve inherits a state no admissible braking can keep
// feasible. Planned gaps therefore widen by margin * max(0, closing speed);
// executed states are still judged against the bare distance.
inline constexpr double kClosingMargin = 0.3;

// Headway constraint against a fixed neighbor trajectory, sampled onto
// whatever decision grid the transcription uses. The follower keeps
// reaction_time * v_follower + standstill_gap.
struct HeadwayConstraint {
  Trajectory other;             // the fixed neighbor path
  bool self_leads = false;      // true: x_self - x_other >= d(v_other)
  bool terminal_only = false;   // enforce at the last node only
  SafetyParams safety;
  double closing_margin = kClosingMargin;
};

struct TrackingObjective {
  double p = 1.0;              // weight on following the reference control
  std::vector<double> u_ref;   // size n
};

struct OcpSpec {
  double x0 = 0.0;
  double v0 = 0.0;
  double t_start = 0.0;
  double t_end = 1.0;
  int n_grid = 40;
  VehicleParams params;

  double energy_weight = 0.4;  // alpha_u; cost term (energy_weight/2) u^2

  TerminalSpeed terminal_speed = TerminalSpeed::Free;
  double v_target = 0.0;
  double delta_v = 1.0;        // half-width of the hard terminal band
  double soft_weight = 0.0;    // weight for TerminalSpeed::Soft

  std::optional<double> x_target;  // exact terminal position (equality)

  std::optional<TrackingObjective> tracking;  // sum dt [p (u-ur)^2 + (1-p) u^2]
  double running_disruption_weight = 0.0;     // sum dt w (v_k - v_target)^2

  std::vector<HeadwayConstraint> headways;

  void validate() const {
    if (n_grid < 1) throw ValidationError("ocp.n_grid", "must be >= 1");
    if (t_end <= t_start) throw ValidationError("ocp.t_end", "must exceed t_start");
    if (energy_weight < 0.0)
      throw ValidationError("ocp.energy_weight", "must be >= 0");
    if (tracking && tracking->u_ref.size() != static_cast<std::size_t>(n_grid))
      throw ValidationError("ocp.tracking.u_ref", "needs one value per interval");
    if (tracking && (tracking->p < 0.0 || tracking->p > 1.0))
      throw ValidationError("ocp.tracking.p", "must be in [0, 1]");
    for (const auto& h : headways)
      if (h.other.x.empty() || h.other.v.size() != h.other.x.size())
        throw ValidationError("ocp.headways", "neighbor trajectory is empty");
  }
};

inline HeadwayConstraint headway_against(Trajectory other, bool self_leads,
                                         bool terminal_only, const SafetyParams& sp) {
  HeadwayConstraint h;
  h.other = std::move(other);
  h.self_leads = self_leads;
  h.terminal_only = terminal_only;
  h.safety = sp;
  return h;
}

namespace detail {

// Row vectors of the affine rollup: v_k = v0 + dt * sum_{j<k} u_j and
// x_k = x0 + k dt v0 + dt^2 sum_{j<=k-2} (k-1-j) u_j.
inline void rollup_rows(int n, double dt, int k, Eigen::RowVectorXd& vrow,
                        Eigen::RowVectorXd& xrow) {
  vrow = Eigen::RowVectorXd::Zero(n);
  xrow = Eigen::RowVectorXd::Zero(n);
  for (int j = 0; j < k; ++j) vrow(j) = dt;
  for (int j = 0; j + 2 <= k; ++j) xrow(j) = dt * dt * static_cast<double>(k - 1 - j);
}

}  // namespace detail

// Build the QP for a longitudinal OCP. Decision variables are the n_grid
// control values; everything else is eliminated.
inline QpProblem transcribe(const OcpSpec& spec) {
  spec.validate();
  const int n = spec.n_grid;
  const double dt = (spec.t_end - spec.t_start) / static_cast<double>(n);

  QpProblem qp;
  qp.G = Eigen::MatrixXd::Zero(n, n);
  qp.a = Eigen::VectorXd::Zero(n);

  // Control energy (energy_weight/2) u^2 dt per interval.
  for (int k = 0; k < n; ++k) qp.G(k, k) += spec.energy_weight * dt;

  // Reference tracking: dt [p (u - ur)^2 + (1-p) u^2] = dt [u^2 - 2 p ur u] + c.
  if (spec.tracking) {
    const double p = spec.tracking->p;
    for (int k = 0; k < n; ++k) {
      qp.G(k, k) += 2.0 * dt;
      qp.a(k) -= 2.0 * p * dt * spec.tracking->u_ref[static_cast<std::size_t>(k)];
    }
  }

  Eigen::RowVectorXd vrow, xrow;

  // Soft terminal speed: w (v_n - v_t)^2.
  if (spec.terminal_speed == TerminalSpeed::Soft && spec.soft_weight > 0.0) {
    detail::rollup_rows(n, dt, n, vrow, xrow);
    qp.G += 2.0 * spec.soft_weight * vrow.transpose() * vrow;
    qp.a += 2.0 * spec.soft_weight * (spec.v0 - spec.v_target) * vrow.transpose();
  }

  // Running disruption: w dt (v_k - v_t)^2 for k = 1..n.
  if (spec.running_disruption_weight > 0.0) {
    const double w = spec.running_disruption_weight;
    for (int k = 1; k <= n; ++k) {
      detail::rollup_rows(n, dt, k, vrow, xrow);
      qp.G += 2.0 * w * dt * vrow.transpose() * vrow;
      qp.a += 2.0 * w * dt * (spec.v0 - spec.v_target) * vrow.transpose();
    }
  }

  std::vector<Eigen::RowVectorXd> eq_rows, in_rows;
  std::vector<double> eq_rhs, in_rhs;

  // Control bounds.
  for (int k = 0; k < n; ++k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    row(k) = 1.0;
    in_rows.push_back(row);
    in_rhs.push_back(spec.params.u_min);
    in_rows.push_back(-row);
    in_rhs.push_back(-spec.params.u_max);
  }

  // Speed bounds at every node past the fixed initial state.
  for (int k = 1; k <= n; ++k) {
    detail::rollup_rows(n, dt, k, vrow, xrow);
    in_rows.push_back(vrow);
    in_rhs.push_back(spec.params.v_min - spec.v0);
    in_rows.push_back(-vrow);
    in_rhs.push_back(-(spec.params.v_max - spec.v0));
  }

  detail::rollup_rows(n, dt, n, vrow, xrow);
  const double xn_fixed = spec.x0 + static_cast<double>(n) * dt * spec.v0;

  switch (spec.terminal_speed) {
    case TerminalSpeed::HardBand:
      in_rows.push_back(vrow);
      in_rhs.push_back(spec.v_target - spec.delta_v - spec.v0);
      in_rows.push_back(-vrow);
      in_rhs.push_back(-(spec.v_target + spec.delta_v - spec.v0));
      break;
    case TerminalSpeed::Equality:
      eq_rows.push_back(vrow);
      eq_rhs.push_back(spec.v_target - spec.v0);
      break;
    default:
      break;
  }

  if (spec.x_target) {
    eq_rows.push_back(xrow);
    eq_rhs.push_back(*spec.x_target - xn_fixed);
  }

  // Headway rows: leader position minus follower position >= d(v_follower).
  // With a closing margin m, a second row per node asks for m extra metres of
  // gap per m/s of closing speed; it is slacker than the base row whenever the
  // gap is opening, so the pair jointly encodes d + m * max(0, closing).
  for (const auto& h : spec.headways) {
    const int k_first = h.terminal_only ? n : 1;
    for (int k = k_first; k <= n; ++k) {
      detail::rollup_rows(n, dt, k, vrow, xrow);
      const double xk_fixed = spec.x0 + static_cast<double>(k) * dt * spec.v0;
      const TrajectorySample o = sample(h.other, spec.t_start + dt * k);
      if (h.self_leads) {
        // x_self,k - x_other,k >= tau v_other,k + delta [+ m (v_other,k - v_self,k)]
        in_rows.push_back(xrow);
        in_rhs.push_back(o.x + h.safety.reaction_time * o.v +
                         h.safety.standstill_gap - xk_fixed);
        if (h.closing_margin > 0.0) {
          in_rows.push_back(xrow + h.closing_margin * vrow);
          in_rhs.push_back(o.x +
                           (h.safety.reaction_time + h.closing_margin) * o.v +
                           h.safety.standstill_gap - xk_fixed -
                           h.closing_margin * spec.v0);
        }
      } else {
        // x_other,k - x_self,k >= tau v_self,k + delta [+ m (v_self,k - v_other,k)]
        in_rows.push_back(-xrow - h.safety.reaction_time * vrow);
        in_rhs.push_back(h.safety.reaction_time * spec.v0 + h.safety.standstill_gap -
                         o.x + xk_fixed);
        if (h.closing_margin > 0.0) {
          in_rows.push_back(-xrow -
                            (h.safety.reaction_time + h.closing_margin) * vrow);
          in_rhs.push_back(
              (h.safety.reaction_time + h.closing_margin) * spec.v0 +
              h.safety.standstill_gap - o.x + xk_fixed - h.closing_margin * o.v);
        }
      }
    }
  }

  const auto m_eq = static_cast<Eigen::Index>(eq_rows.size());
  const auto m_in = static_cast<Eigen::Index>(in_rows.size());
  qp.A_eq.resize(m_eq, n);
  qp.b_eq.resize(m_eq);
  for (Eigen::Index i = 0; i < m_eq; ++i) {
    qp.A_eq.row(i) = eq_rows[static_cast<std::size_t>(i)];
    qp.b_eq(i) = eq_rhs[static_cast<std::size_t>(i)];
  }
  qp.A_in.resize(m_in, n);
  qp.b_in.resize(m_in);
  for (Eigen::Index i = 0; i < m_in; ++i) {
    qp.A_in.row(i) = in_rows[static_cast<std::size_t>(i)];
    qp.b_in(i) = in_rhs[static_cast<std::size_t>(i)];
  }
  return qp;
}

struct OcpResult {
  SolveStatus status = SolveStatus::Ok;
  Trajectory trajectory;
};

namespace detail {

// Evaluate the configured objective terms on a solved control sequence.
inline double spec_cost(const OcpSpec& spec, const Trajectory& tr) {
  const double dt = tr.dt;
  double cost = 0.0;
  for (std::size_t k = 0; k < tr.u.size(); ++k) {
    const double u = tr.u[k];
    cost += 0.5 * spec.energy_weight * u * u * dt;
    if (spec.tracking) {
      const double du = u - spec.tracking->u_ref[k];
      cost += dt * (spec.tracking->p * du * du + (1.0 - spec.tracking->p) * u * u);
    }
    if (spec.running_disruption_weight > 0.0) {
      const double dv = tr.v[k + 1] - spec.v_target;
      cost += spec.running_disruption_weight * dt * dv * dv;
    }
  }
  if (spec.terminal_speed == TerminalSpeed::Soft && spec.soft_weight > 0.0)
    cost += spec.soft_weight * speed_disruption(tr.v.back(), spec.v_target);
  return cost;
}

// A headway row evaluated on fixed data at node 0 can already be violated;
// no control choice can repair a fixed node, so report infeasibility up front.
inline bool initially_violated(const OcpSpec& spec) {
  for (const auto& h : spec.headways) {
    if (h.terminal_only) continue;
    const TrajectorySample o = sample(h.other, spec.t_start);
    const double gap = h.self_leads ? spec.x0 - o.x : o.x - spec.x0;
    const double vf = h.self_leads ? o.v : spec.v0;
    if (gap < h.safety.reaction_time * vf + h.safety.standstill_gap - 1e-9)
      return true;
  }
  return false;
}

}  // namespace detail

// Solve a fixed-horizon longitudinal OCP. The returned trajectory's cost is
// the problem's own objective (not the QP value, which drops constants).
inline OcpResult solve_fixed_time_ocp(const OcpSpec& spec, double tol = 1e-8) {
  OcpResult out;
  if (detail::initially_violated(spec)) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  const QpProblem qp = transcribe(spec);
  const QpResult r = solve_qp(qp, tol);
  if (r.status != QpStatus::Ok) {
    out.status = r.status == QpStatus::Infeasible ? SolveStatus::Infeasible
                                                  : SolveStatus::NoConvergence;
    return out;
  }
  const double dt = (spec.t_end - spec.t_start) / spec.n_grid;
  std::vector<double> u(r.x.data(), r.x.data() + r.x.size());
  out.trajectory = rollout(spec.x0, spec.v0, spec.t_start, dt, std::move(u));
  out.trajectory.cost = detail::spec_cost(spec, out.trajectory);
  return out;
}

struct FreeTimeResult {
  SolveStatus status = SolveStatus::Ok;
  Trajectory trajectory;
  double t_f = 0.0;
  double cost = 0.0;  // alpha_t (t_f - t_start) + inner objective
};

// Free terminal-time OCP via an outer scan over t_f = t_start + j*time_step up
// to the absolute cap. Grid: n_grid intervals per candidate unless grid_dt > 0,
// in which case each candidate uses round(horizon/grid_dt) intervals so the
// grid stays aligned with the plant. Ties within 1e-9 keep the smaller t_f.
inline FreeTimeResult solve_free_time_ocp(const OcpSpec& spec, double alpha_t,
                                          double t_f_max, double time_step,
                                          double grid_dt = 0.0,
                                          double tol = 1e-8) {
  if (time_step <= 0.0)
    throw ValidationError("free_time.time_step", "must be > 0");
  FreeTimeResult best;
  best.status = SolveStatus::Infeasible;
  bool any_no_convergence = false;
  double best_cost = std::numeric_limits<double>::infinity();

  for (int j = 1;; ++j) {
    const double t_f = spec.t_start + time_step * static_cast<double>(j);
    if (t_f > t_f_max + 1e-9) break;
    OcpSpec s = spec;
    s.t_end = t_f;
    if (grid_dt > 0.0) {
      const int n = static_cast<int>(std::lround((t_f - spec.t_start) / grid_dt));
      if (n < 1) continue;
      s.n_grid = n;
    }
    const OcpResult r = solve_fixed_time_ocp(s, tol);
    if (r.status == SolveStatus::NoConvergence) {
      any_no_convergence = true;
      continue;
    }
    if (r.status != SolveStatus::Ok) continue;
    const double total = alpha_t * (t_f - spec.t_start) + r.trajectory.cost;
    if (total < best_cost - 1e-9) {
      best_cost = total;
      best.status = SolveStatus::Ok;
      best.trajectory = r.trajectory;
      best.trajectory.cost = total;
      best.t_f = t_f;
      best.cost = total;
    }
  }
  if (best.status != SolveStatus::Ok && any_no_convergence)
    best.status = SolveStatus::NoConvergence;
  return best;
}

// Closed-form minimum-energy solution of the discretized double integrator,
// independent of the QP machinery. Patterns: free motion (u = 0), terminal
// speed only (constant u), terminal position + speed (control linear in the
// node index; the continuum limit is the classic cubic-position solution).
inline Trajectory analytic_min_energy_oracle(double x0, double v0, double t_start,
                                             double t_end, int n_grid,
                                             std::optional<double> v_target,
                                             std::optional<double> x_target,
                                             double energy_weight = 1.0) {
  if (n_grid < 1) throw ValidationError("oracle.n_grid", "must be >= 1");
  if (t_end <= t_start) throw ValidationError("oracle.t_end", "must exceed t_start");
  if (x_target && !v_target)
    throw ValidationError("oracle.x_target", "position pattern needs v_target too");
  if (x_target && n_grid < 2)
    throw ValidationError("oracle.n_grid", "position pattern needs >= 2 intervals");

  const int n = n_grid;
  const double T = t_end - t_start;
  const double dt = T / static_cast<double>(n);
  std::vector<double> u(static_cast<std::size_t>(n), 0.0);

  if (v_target && !x_target) {
    const double uc = (*v_target - v0) / T;
    std::fill(u.begin(), u.end(), uc);
  } else if (v_target && x_target) {
    // u_k = lambda + mu s_k with s_k = n-1-k; moments from the Euler rollup.
    const double A = (*v_target - v0) / dt;
    const double B = (*x_target - x0 - T * v0) / (dt * dt);
    const double nn = static_cast<double>(n);
    const double S1 = nn * (nn - 1.0) / 2.0;
    const double S2 = (nn - 1.0) * nn * (2.0 * nn - 1.0) / 6.0;
    const double det = nn * S2 - S1 * S1;
    const double lambda = (S2 * A - S1 * B) / det;
    const double mu = (nn * B - S1 * A) / det;
    for (int k = 0; k < n; ++k)
      u[static_cast<std::size_t>(k)] = lambda + mu * static_cast<double>(n - 1 - k);
  }

  Trajectory tr = rollout(x0, v0, t_start, dt, std::move(u));
  double cost = 0.0;
  for (double uk : tr.u) cost += 0.5 * energy_weight * uk * uk * dt;
  tr.cost = cost;
  return tr;
}

// Behavior of a human-driven vehicle with compliance probability p: weight p
// on following the reference control, weight 1-p on acting selfishly (zero
// effort plus disruption relative to its own desired speed), subject to its
// headway constraints. With p = 1 this returns a feasibility-projected copy of
// the reference.
inline OcpResult solve_hdv_behavior_ocp(const Trajectory& ref, double p,
                                        OcpSpec spec,
                                        DisruptionMode disruption = DisruptionMode::Terminal,
                                        double tol = 1e-8) {
  if (p < 0.0 || p > 1.0)
    throw ValidationError("behavior.p", "must be in [0, 1]");
  TrackingObjective tracking;
  tracking.p = p;
  tracking.u_ref.resize(static_cast<std::size_t>(spec.n_grid));
  const double dt = (spec.t_end - spec.t_start) / spec.n_grid;
  for (int k = 0; k < spec.n_grid; ++k)
    tracking.u_ref[static_cast<std::size_t>(k)] =
        sample(ref, spec.t_start + (static_cast<double>(k) + 0.5) * dt).u;
  spec.tracking = std::move(tracking);
  spec.energy_weight = 0.0;
  if (disruption == DisruptionMode::Terminal) {
    spec.terminal_speed = TerminalSpeed::Soft;
    spec.soft_weight = 1.0 - p;
    spec.running_disruption_weight = 0.0;
  } else {
    spec.terminal_speed = TerminalSpeed::Free;
    spec.soft_weight = 0.0;
    spec.running_disruption_weight = 1.0 - p;
  }
  spec.v_target = spec.params.v_desired;
  return solve_fixed_time_ocp(spec, tol);
}

// Lateral lane-change trajectory at constant speed.
struct LateralTrajectory {
  double t_start = 0.0;
  double dt = 0.0;
  double v_const = 0.0;
  std::vector<double> phi;    // size n
  std::vector<double> y;      // size n+1
  std::vector<double> theta;  // size n+1
  double cost = 0.0;          // alpha_phi/2 steering energy + alpha_t duration

  std::size_t intervals() const { return phi.size(); }
  double duration() const { return dt * static_cast<double>(phi.size()); }
};

struct LateralResult {
  SolveStatus status = SolveStatus::Ok;
  LateralTrajectory trajectory;
};

// Minimum steering-effort lane change with free terminal time: linearized
// lateral dynamics y' = v theta, theta' = (v/L) phi, terminal y = y_target and
// theta = 0, path kept within [-lane_width/2, 3 lane_width/2]. The outer scan
// trades steering energy against alpha_t per second of lateral phase.
inline LateralResult solve_lateral_ocp(double y0, double theta0, double v_const,
                                       double y_target, const RoadGeometry& road,
                                       const VehicleParams& params,
                                       const CostWeights& weights, double t_start,
                                       double t_f_max, double time_step,
                                       double grid_dt = 0.0, double tol = 1e-8) {
  if (v_const <= 0.0)
    throw ValidationError("lateral.v_const", "needs forward motion");
  LateralResult best;
  best.status = SolveStatus::Infeasible;
  double best_cost = std::numeric_limits<double>::infinity();

  const double gain = v_const / params.wheelbase;  // theta' = gain * phi
  for (int j = 1;; ++j) {
    const double t_f = t_start + time_step * static_cast<double>(j);
    if (t_f > t_f_max + 1e-9) break;
    int n = 0;
    if (grid_dt > 0.0)
      n = static_cast<int>(std::lround((t_f - t_start) / grid_dt));
    else
      n = 40;
    if (n < 2) continue;
    const double dt = (t_f - t_start) / static_cast<double>(n);

    // Same double-integrator structure: theta plays speed, y plays position,
    // with control phi scaled by gain (theta) and v_const (y).
    QpProblem qp;
    qp.G = Eigen::MatrixXd::Zero(n, n);
    qp.a = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) qp.G(k, k) += weights.alpha_phi * dt;

    Eigen::RowVectorXd trow, yrow;
    std::vector<Eigen::RowVectorXd> in_rows;
    std::vector<double> in_rhs;
    std::vector<Eigen::RowVectorXd> eq_rows;
    std::vector<double> eq_rhs;

    auto rows_at = [&](int k) {
      detail::rollup_rows(n, dt, k, trow, yrow);
      trow *= gain;              // theta_k = theta0 + gain dt sum phi
      yrow *= gain * v_const;    // y_k = y0 + k dt v theta0 + v gain dt^2 sum ...
    };

    for (int k = 0; k < n; ++k) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      row(k) = 1.0;
      in_rows.push_back(row);
      in_rhs.push_back(params.phi_min);
      in_rows.push_back(-row);
      in_rhs.push_back(-params.phi_max);
    }
    const double lo = -road.lane_width / 2.0, hi = 1.5 * road.lane_width;
    for (int k = 1; k <= n; ++k) {
      rows_at(k);
      const double y_fixed = y0 + static_cast<double>(k) * dt * v_const * theta0;
      in_rows.push_back(yrow);
      in_rhs.push_back(lo - y_fixed);
      in_rows.push_back(-yrow);
      in_rhs.push_back(-(hi - y_fixed));
    }
    rows_at(n);
    const double yn_fixed = y0 + static_cast<double>(n) * dt * v_const * theta0;
    eq_rows.push_back(yrow);
    eq_rhs.push_back(y_target - yn_fixed);
    eq_rows.push_back(trow);
    eq_rhs.push_back(0.0 - theta0);

    qp.A_eq.resize(static_cast<Eigen::Index>(eq_rows.size()), n);
    qp.b_eq.resize(qp.A_eq.rows());
    for (Eigen::Index i = 0; i < qp.A_eq.rows(); ++i) {
      qp.A_eq.row(i) = eq_rows[static_cast<std::size_t>(i)];
      qp.b_eq(i) = eq_rhs[static_cast<std::size_t>(i)];
    }
    qp.A_in.resize(static_cast<Eigen::Index>(in_rows.size()), n);
    qp.b_in.resize(qp.A_in.rows());
    for (Eigen::Index i = 0; i < qp.A_in.rows(); ++i) {
      qp.A_in.row(i) = in_rows[static_cast<std::size_t>(i)];
      qp.b_in(i) = in_rhs[static_cast<std::size_t>(i)];
    }

    const QpResult r = solve_qp(qp, tol);
    if (r.status != QpStatus::Ok) continue;
    double steer = 0.0;
    for (Eigen::Index k = 0; k < r.x.size(); ++k)
      steer += 0.5 * weights.alpha_phi * r.x(k) * r.x(k) * dt;
    const double total = steer + weights.alpha_t * (t_f - t_start);
    if (total < best_cost - 1e-9) {
      best_cost = total;
      LateralTrajectory lt;
      lt.t_start = t_start;
      lt.dt = dt;
      lt.v_const = v_const;
      lt.phi.assign(r.x.data(), r.x.data() + r.x.size());
      lt.y.resize(lt.phi.size() + 1);
      lt.theta.resize(lt.phi.size() + 1);
      lt.y[0] = y0;
      lt.theta[0] = theta0;
      for (std::size_t k = 0; k < lt.phi.size(); ++k) {
        lt.y[k + 1] = lt.y[k] + v_const * lt.theta[k] * dt;
        lt.theta[k + 1] = lt.theta[k] + gain * lt.phi[k] * dt;
      }
      lt.cost = total;
      best.trajectory = std::move(lt);
      best.status = SolveStatus::Ok;
    }
  }
  return best;
}

}  // namespace ccc
