#pragma once

// Merge-slot selection. Each planning step solves the merging vehicle's own
// free-time problem, then evaluates every adjacent slot in the candidate set
// by re-planning the whole visible lane front-to-back with the slot's terminal
// gap constraints, and keeps the cheapest feasible slot. Also decides when the
// lateral move is safe to start.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "ccc/scenario.hpp"
#include "ccc/trajectory_opt.hpp"

namespace ccc {

// Fast-lane vehicles visible to the planner: indices into Scenario::fast_lane
// (kept in decreasing-x order) whose position lies inside the closed window
// [x_merger - sensor_range_rear, x_obstacle + sensor_range_fwd].
struct CandidateSet {
  std::vector<std::size_t> members;
};

inline CandidateSet candidate_set(const Scenario& sc) {
  CandidateSet s;
  const double lo = sc.merger.state.x - sc.road.sensor_range_rear;
  const double hi = sc.obstacle.state.x + sc.road.sensor_range_fwd;
  for (std::size_t i = 0; i < sc.fast_lane.size(); ++i) {
    const double x = sc.fast_lane[i].state.x;
    if (x >= lo && x <= hi) s.members.push_back(i);
  }
  return s;
}

// An adjacent gap in the candidate set. Either side may be absent: no lead
// means merging ahead of every candidate, no rear means merging behind all.
struct MergePair {
  std::optional<std::size_t> lead;  // index into Scenario::fast_lane
  std::optional<std::size_t> rear;
  double triplet_cost = 0.0;        // J_lead + J_rear + J_merger
};

struct PlanConfig {
  CostWeights weights;
  double t_horizon_cap = 10.0;  // absolute latest admissible reference end time
  double time_step = 0.05;      // free-time scan resolution
  double grid_dt = 0.0;         // > 0: grid step of every OCP; else n_grid_default
  int n_grid_default = 40;
  double delta_v = 1.0;         // merger's terminal speed half-band
  double tol = 1e-8;
};

enum class PlanStatus { Ok, MergerInfeasible, AllPairsInfeasible };

struct PlanResult {
  PlanStatus status = PlanStatus::Ok;
  MergePair pair;
  double t_f = 0.0;              // shared horizon end of all references
  Trajectory ref_merger;
  std::vector<Trajectory> refs;  // one per fast-lane vehicle (cruise if unseen)
};

namespace detail {

// Constant-speed path; sample() extends it exactly to any time.
inline Trajectory cruise_path(const VehicleState& st, double t_start) {
  return rollout(st.x, st.v, t_start, 1.0, std::vector<double>{0.0});
}

// Base reference problem for one fast-lane vehicle: control energy plus
// terminal speed disruption toward its own desired speed.
inline OcpSpec lane_spec(const Vehicle& veh, double t_k, double t_f, int n,
                         const PlanConfig& cfg) {
  OcpSpec spec;
  spec.x0 = veh.state.x;
  spec.v0 = veh.state.v;
  spec.t_start = t_k;
  spec.t_end = t_f;
  spec.n_grid = n;
  spec.params = veh.params;
  spec.energy_weight = cfg.weights.alpha_u;
  spec.terminal_speed = TerminalSpeed::Soft;
  spec.v_target = veh.params.v_desired;
  spec.soft_weight = cfg.weights.alpha_v;
  return spec;
}

}  // namespace detail

// Plan references for the merger and the whole visible lane at time t_k.
//
// On the first call the merger's free-time solve fixes the nominal terminal
// time; later calls pass that time back in (`t_f_fixed`) and the merger
// re-solves on the unchanged absolute horizon, so procrastinating vehicles
// face a shrinking window rather than a drifting deadline. Gaps are tried on
// the nominal horizon; if none admits a feasible lane plan, the shared horizon
// is extended step by step (the merger re-solves on the longer fixed horizon
// and simply arrives early), giving slower vehicles time to open the gap,
// until the absolute cap is reached.
inline PlanResult plan_references(const Scenario& sc, const CandidateSet& S,
                                  double t_k, const PlanConfig& cfg,
                                  std::optional<double> t_f_fixed = std::nullopt) {
  PlanResult out;
  const SafetyParams& sp = sc.safety;
  const Trajectory obstacle_path = detail::cruise_path(sc.obstacle.state, t_k);

  OcpSpec mspec;
  mspec.x0 = sc.merger.state.x;
  mspec.v0 = sc.merger.state.v;
  mspec.t_start = t_k;
  mspec.n_grid = cfg.n_grid_default;
  mspec.params = sc.merger.params;
  mspec.energy_weight = cfg.weights.alpha_u;
  mspec.terminal_speed = TerminalSpeed::HardBand;
  mspec.v_target = sc.merger.params.v_desired;
  mspec.delta_v = cfg.delta_v;
  mspec.headways.push_back(headway_against(obstacle_path, false, false, sp));

  double t_f_nominal = 0.0;
  FreeTimeResult ft;
  if (t_f_fixed) {
    t_f_nominal = *t_f_fixed;
  } else {
    ft = solve_free_time_ocp(mspec, cfg.weights.alpha_t, cfg.t_horizon_cap,
                             cfg.time_step, cfg.grid_dt, cfg.tol);
    if (ft.status != SolveStatus::Ok) {
      out.status = PlanStatus::MergerInfeasible;
      return out;
    }
    t_f_nominal = ft.t_f;
  }

  const std::size_t m = S.members.size();
  bool merger_ever_feasible = !t_f_fixed;
  for (int ext = 0;; ++ext) {
    const double t_f = t_f_nominal + cfg.time_step * static_cast<double>(ext);
    if (t_f > cfg.t_horizon_cap + 1e-9) break;
    int n = cfg.n_grid_default;
    if (cfg.grid_dt > 0.0) {
      n = static_cast<int>(std::lround((t_f - t_k) / cfg.grid_dt));
      if (n < 1) continue;
    }

    Trajectory ref_merger;
    double j_merger = 0.0;
    if (!t_f_fixed && ext == 0) {
      ref_merger = ft.trajectory;
      j_merger = ft.cost;
    } else {
      OcpSpec ms = mspec;
      ms.t_end = t_f;
      ms.n_grid = n;
      const OcpResult r = solve_fixed_time_ocp(ms, cfg.tol);
      if (r.status != SolveStatus::Ok) continue;
      merger_ever_feasible = true;
      ref_merger = r.trajectory;
      j_merger = cfg.weights.alpha_t * (t_f - t_k) + r.trajectory.cost;
    }

    // Lane plan for one gap choice: every candidate keeps headway to its
    // freshly planned predecessor; the gap's lead must end ahead of the
    // merger's terminal point, the gap's rear must end behind it.
    auto sweep = [&](std::optional<std::size_t> lead, std::optional<std::size_t> rear,
                     std::vector<Trajectory>& refs, double& pair_cost) -> bool {
      pair_cost = 0.0;
      refs.assign(sc.fast_lane.size(), Trajectory{});
      const Trajectory* pred = nullptr;
      for (std::size_t si = 0; si < m; ++si) {
        const std::size_t idx = S.members[si];
        OcpSpec spec = detail::lane_spec(sc.fast_lane[idx], t_k, t_f, n, cfg);
        if (pred) spec.headways.push_back(headway_against(*pred, false, false, sp));
        const bool is_lead = lead && *lead == idx;
        const bool is_rear = rear && *rear == idx;
        if (is_lead) spec.headways.push_back(headway_against(ref_merger, true, true, sp));
        if (is_rear) spec.headways.push_back(headway_against(ref_merger, false, true, sp));
        const OcpResult r = solve_fixed_time_ocp(spec, cfg.tol);
        if (r.status != SolveStatus::Ok) return false;
        refs[idx] = r.trajectory;
        if (is_lead || is_rear) pair_cost += r.trajectory.cost;
        pred = &refs[idx];
      }
      return true;
    };

    double best_cost = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_slot;
    std::vector<Trajectory> best_refs;
    MergePair best_pair;
    for (std::size_t slot = 0; slot <= m; ++slot) {
      const std::optional<std::size_t> lead =
          slot == 0 ? std::nullopt : std::optional<std::size_t>(S.members[slot - 1]);
      const std::optional<std::size_t> rear =
          slot == m ? std::nullopt : std::optional<std::size_t>(S.members[slot]);
      std::vector<Trajectory> refs;
      double pair_cost = 0.0;
      if (!sweep(lead, rear, refs, pair_cost)) continue;
      const double total = pair_cost + j_merger;
      if (total < best_cost - 1e-9) {
        best_cost = total;
        best_slot = slot;
        best_refs = std::move(refs);
        best_pair = MergePair{lead, rear, total};
      }
    }
    if (best_slot) {
      // Vehicles outside the sensor window are expected to hold their speed.
      for (std::size_t i = 0; i < best_refs.size(); ++i)
        if (best_refs[i].x.empty())
          best_refs[i] = rollout(sc.fast_lane[i].state.x, sc.fast_lane[i].state.v,
                                 t_k, (t_f - t_k) / n, std::vector<double>(n, 0.0));
      out.status = PlanStatus::Ok;
      out.pair = best_pair;
      out.t_f = t_f;
      out.ref_merger = std::move(ref_merger);
      out.refs = std::move(best_refs);
      return out;
    }
  }
  out.status = merger_ever_feasible ? PlanStatus::AllPairsInfeasible
                                    : PlanStatus::MergerInfeasible;
  return out;
}

// Safe-to-move test on current states (inclusive inequalities): the merger is
// clear of the slow-lane obstacle, clear of the gap's lead, and the gap's rear
// is clear of the merger. Absent gap members pass vacuously. Planned gaps ride
// the safety bound exactly, so equality is tested with a hair of slack; without
// it, float dust decides whether a fully opened gap counts.
inline bool lateral_trigger(const Scenario& sc, const MergePair& pair) {
  constexpr double kSlack = 1e-6;
  const VehicleState& c = sc.merger.state;
  const double d_c = safety_distance(c.v, sc.safety);
  if (sc.obstacle.state.x - c.x < d_c - kSlack) return false;
  if (pair.lead && sc.fast_lane[*pair.lead].state.x - c.x < d_c - kSlack)
    return false;
  if (pair.rear) {
    const VehicleState& r = sc.fast_lane[*pair.rear].state;
    if (c.x - r.x < safety_distance(r.v, sc.safety) - kSlack) return false;
  }
  return true;
}

}  // namespace ccc
