#pragma once

// Closed-loop maneuver engine. Each sampling instant: measure every fast-lane
// vehicle against the reference it was given, feed the compliance controllers,
// check whether the merge gap is physically safe, and otherwise re-plan the
// lane and re-solve each vehicle's compliance-weighted behavior. Vehicles are
// integrated at a finer plant step between sampling instants. Once the gap is
// safe the merger runs a lateral trajectory open-loop and the run ends.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ccc/behavior.hpp"
#include "ccc/compliance.hpp"
#include "ccc/planner.hpp"
#include "ccc/scenario.hpp"
#include "ccc/trajectory_opt.hpp"

namespace ccc {

struct SimConfig {
  double dt_sample = 0.25;  // controller / replanning period
  double dt_plant = 0.05;   // integration step, divides dt_sample
  double t_max = 10.0;      // deadline for a safe gap, relative to scenario t0
  ControllerMode controller_mode = ControllerMode::Both;
  ComplianceConfig compliance;
  CostWeights weights;
  DisruptionMode disruption = DisruptionMode::Terminal;
  double time_step = 0.0;  // free-time scan step; 0 means dt_sample
  double tol = 1e-8;

  void validate() const {
    if (dt_plant <= 0.0) throw ValidationError("sim.dt_plant", "must be > 0");
    if (dt_sample < dt_plant)
      throw ValidationError("sim.dt_sample", "must be >= dt_plant");
    const double ratio = dt_sample / dt_plant;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
      throw ValidationError("sim.dt_sample", "must be a multiple of dt_plant");
    if (time_step > 0.0) {
      const double r2 = time_step / dt_plant;
      if (std::abs(r2 - std::round(r2)) > 1e-9)
        throw ValidationError("sim.time_step", "must be a multiple of dt_plant");
    }
    if (t_max <= 0.0) throw ValidationError("sim.t_max", "must be > 0");
    compliance.validate();
  }
};

struct StateRow {
  double t = 0.0;
  int id = 0;
  double x = 0.0, y = 0.0, theta = 0.0, v = 0.0, u = 0.0;
};

struct ComplianceRow {
  double t = 0.0;
  int id = 0;
  double m = 0.0, m_bar = 0.0, p = 0.0, c = 0.0, c_global = 0.0;
};

struct ReferenceRow {
  double t = 0.0;
  int id = 0;
  double x_ref = 0.0, v_ref = 0.0, u_ref = 0.0;
};

struct PairRow {
  double t = 0.0;
  std::optional<int> lead_id;
  std::optional<int> rear_id;
  double t_f = 0.0;
  double triplet_cost = 0.0;
};

struct ManeuverResult {
  bool feasible = false;
  std::string reason;  // why the run is infeasible; empty otherwise

  std::optional<double> t_lateral;
  std::optional<double> t_final;
  std::optional<double> maneuver_time;   // t_final - t0
  std::optional<double> triplet_energy;  // executed sum u^2 dt over the triplet
  std::vector<std::pair<int, double>> disruption;       // id -> (v - v_d)^2 at end
  std::vector<std::pair<int, double>> executed_energy;  // id -> sum u^2 dt

  MergePair final_pair;  // gap in force when the lateral move fired
  std::optional<int> pair_lead_id;  // vehicle ids of that gap
  std::optional<int> pair_rear_id;
  LateralTrajectory lateral;

  std::vector<StateRow> states;
  std::vector<ComplianceRow> compliance;
  std::vector<ReferenceRow> references;
  std::vector<PairRow> pairs;
};

inline ManeuverResult run_maneuver(const Scenario& initial, const SimConfig& cfg) {
  cfg.validate();
  initial.validate();
  Scenario sc = initial;
  const double t0 = sc.t0;
  const double deadline = t0 + cfg.t_max;
  const double scan_step = cfg.time_step > 0.0 ? cfg.time_step : cfg.dt_sample;
  const auto steps_per_sample =
      static_cast<int>(std::lround(cfg.dt_sample / cfg.dt_plant));
  const std::size_t n_lane = sc.fast_lane.size();

  PlanConfig pcfg;
  pcfg.weights = cfg.weights;
  pcfg.t_horizon_cap = deadline;
  pcfg.time_step = scan_step;
  pcfg.grid_dt = cfg.dt_plant;
  pcfg.tol = cfg.tol;

  ManeuverResult res;

  std::vector<AgentComplianceState> agents;
  agents.reserve(n_lane);
  for (const Vehicle& veh : sc.fast_lane)
    agents.push_back(make_agent(veh.q, veh.cls == VehicleClass::Cav, cfg.compliance));
  double global_cost = 0.0;

  MergePair pair;
  Trajectory ref_merger;
  std::vector<Trajectory> refs(n_lane);
  std::vector<Trajectory> behav(n_lane);
  bool lateral_active = false;
  LateralTrajectory lat;

  std::vector<std::pair<int, double>> energy;
  auto energy_add = [&](int id, double u) {
    for (auto& e : energy)
      if (e.first == id) {
        e.second += u * u * cfg.dt_plant;
        return;
      }
    energy.emplace_back(id, u * u * cfg.dt_plant);
  };

  auto merger_controls = [&](double t) -> ControlInput {
    if (!lateral_active) return ControlInput{sample(ref_merger, t).u, 0.0};
    double rel = (t - lat.t_start) / lat.dt;
    auto k = static_cast<std::size_t>(std::max(0.0, rel + 1e-9));
    if (k >= lat.phi.size()) return ControlInput{0.0, 0.0};
    return ControlInput{0.0, lat.phi[k]};
  };

  auto record_states = [&](double t) {
    for (std::size_t i = 0; i < n_lane; ++i) {
      const Vehicle& veh = sc.fast_lane[i];
      res.states.push_back(StateRow{t, veh.id, veh.state.x, veh.state.y,
                                    veh.state.theta, veh.state.v,
                                    sample(behav[i], t).u});
    }
    const ControlInput mc = merger_controls(t);
    res.states.push_back(StateRow{t, sc.merger.id, sc.merger.state.x,
                                  sc.merger.state.y, sc.merger.state.theta,
                                  sc.merger.state.v, mc.u});
    res.states.push_back(StateRow{t, sc.obstacle.id, sc.obstacle.state.x,
                                  sc.obstacle.state.y, sc.obstacle.state.theta,
                                  sc.obstacle.state.v, 0.0});
  };

  auto record_compliance = [&](double t) {
    for (std::size_t i = 0; i < n_lane; ++i)
      res.compliance.push_back(ComplianceRow{t, sc.fast_lane[i].id, agents[i].m,
                                             agents[i].m_bar, agents[i].p,
                                             agents[i].c, global_cost});
  };

  auto record_references = [&](double t) {
    for (std::size_t i = 0; i < n_lane; ++i) {
      const TrajectorySample s = sample(refs[i], t);
      res.references.push_back(ReferenceRow{t, sc.fast_lane[i].id, s.x, s.v, s.u});
    }
    const TrajectorySample s = sample(ref_merger, t);
    res.references.push_back(ReferenceRow{t, sc.merger.id, s.x, s.v, s.u});
  };

  // Record the boundary row at t, then advance every vehicle one plant step.
  auto plant_step = [&](double t) {
    record_states(t);
    for (std::size_t i = 0; i < n_lane; ++i) {
      Vehicle& veh = sc.fast_lane[i];
      const double u = sample(behav[i], t).u;
      energy_add(veh.id, u);
      veh.state = step_dynamics(veh.state, ControlInput{u, 0.0},
                                veh.params.wheelbase, cfg.dt_plant);
    }
    const ControlInput mc = merger_controls(t);
    energy_add(sc.merger.id, mc.u);
    sc.merger.state = step_dynamics(sc.merger.state, mc,
                                    sc.merger.params.wheelbase, cfg.dt_plant);
    energy_add(sc.obstacle.id, 0.0);
    sc.obstacle.state = step_dynamics(sc.obstacle.state, ControlInput{0.0, 0.0},
                                      sc.obstacle.params.wheelbase, cfg.dt_plant);
  };

  // The first plan fixes the merger's terminal time; later plans re-solve on
  // that same absolute horizon (extensions, once taken, carry forward).
  std::optional<double> t_f_frozen;
  auto plan_at = [&](double t_k) -> bool {
    const CandidateSet S = candidate_set(sc);
    PlanResult pr = plan_references(sc, S, t_k, pcfg, t_f_frozen);
    if (pr.status == PlanStatus::MergerInfeasible) {
      res.reason = "merging vehicle has no feasible trajectory";
      return false;
    }
    if (pr.status == PlanStatus::AllPairsInfeasible) {
      res.reason = "no feasible merge slot";
      return false;
    }
    t_f_frozen = pr.t_f;
    pair = pr.pair;
    ref_merger = std::move(pr.ref_merger);
    refs = std::move(pr.refs);
    res.pairs.push_back(PairRow{
        t_k,
        pair.lead ? std::optional<int>(sc.fast_lane[*pair.lead].id) : std::nullopt,
        pair.rear ? std::optional<int>(sc.fast_lane[*pair.rear].id) : std::nullopt,
        pr.t_f, pair.triplet_cost});
    return true;
  };

  // Front-to-back: each vehicle reacts to the actual path of the one ahead.
  auto behaviors_at = [&]() -> bool {
    const Trajectory* pred = nullptr;
    for (std::size_t i = 0; i < n_lane; ++i) {
      BehaviorRequest rq;
      rq.vehicle_id = sc.fast_lane[i].id;
      rq.state = sc.fast_lane[i].state;
      rq.params = sc.fast_lane[i].params;
      rq.reference = &refs[i];
      rq.p = agents[i].p;
      rq.predecessor = pred;
      rq.safety = sc.safety;
      rq.disruption = cfg.disruption;
      rq.tol = cfg.tol;
      BehaviorResult br = actual_trajectory(rq);
      if (br.status != SolveStatus::Ok) {
        res.reason = "behavior infeasible for vehicle " + std::to_string(rq.vehicle_id);
        return false;
      }
      behav[i] = std::move(br.trajectory);
      pred = &behav[i];
    }
    return true;
  };

  if (!plan_at(t0)) {
    record_states(t0);
    return res;
  }
  if (!behaviors_at()) {
    record_states(t0);
    return res;
  }
  record_compliance(t0);
  record_references(t0);

  double t_k = t0;
  bool triggered = lateral_trigger(sc, pair);
  int k = 0;
  while (!triggered) {
    const double t_next = t0 + cfg.dt_sample * static_cast<double>(k + 1);
    if (t_next > deadline + 1e-9) {
      res.reason = "no safe gap before the deadline";
      record_states(t_k);
      return res;
    }
    for (int j = 0; j < steps_per_sample; ++j)
      plant_step(t_k + cfg.dt_plant * static_cast<double>(j));
    ++k;
    t_k = t_next;

    std::vector<double> errors(n_lane);
    for (std::size_t i = 0; i < n_lane; ++i) {
      const TrajectorySample s = sample(refs[i], t_k);
      VehicleState ref_state = sc.fast_lane[i].state;
      ref_state.x = s.x;
      ref_state.v = s.v;
      errors[i] = measure_error(sc.fast_lane[i].state, ref_state);
    }
    record_references(t_k);
    if (cfg.controller_mode != ControllerMode::None) {
      ComplianceStep st =
          step_all(std::move(agents), global_cost, errors, cfg.compliance,
                   cfg.controller_mode);
      agents = std::move(st.agents);
      global_cost = st.global_cost;
    }
    record_compliance(t_k);

    triggered = lateral_trigger(sc, pair);
    if (triggered) break;
    if (!plan_at(t_k) || !behaviors_at()) {
      record_states(t_k);
      return res;
    }
  }

  const double t_lat = t_k;
  const LateralResult lr = solve_lateral_ocp(
      sc.merger.state.y, sc.merger.state.theta, sc.merger.state.v,
      sc.road.lane_width, sc.road, sc.merger.params, cfg.weights, t_lat,
      t_lat + cfg.t_max, scan_step, cfg.dt_plant, cfg.tol);
  if (lr.status != SolveStatus::Ok) {
    res.reason = "lateral move infeasible";
    record_states(t_k);
    return res;
  }
  lat = lr.trajectory;
  lateral_active = true;
  const double t_final = t_lat + lat.duration();
  const auto lat_steps = static_cast<int>(std::lround(lat.duration() / cfg.dt_plant));

  // The lane's published references can end before t_final (the lateral move
  // outlasts the planning horizon), and a coasting follower would close on a
  // braking predecessor. Solve one last behavior round spanning exactly the
  // lateral window, against reference slices that continue the published
  // plans, with commitments frozen at their values when the move starts.
  if (lat_steps >= 1) {
    const Trajectory* pred = nullptr;
    for (std::size_t i = 0; i < n_lane; ++i) {
      std::vector<double> u_ref(static_cast<std::size_t>(lat_steps));
      for (int j = 0; j < lat_steps; ++j)
        u_ref[static_cast<std::size_t>(j)] =
            sample(refs[i], t_lat + cfg.dt_plant * (static_cast<double>(j) + 0.5)).u;
      const TrajectorySample s0 = sample(refs[i], t_lat);
      const Trajectory slice = rollout(s0.x, s0.v, t_lat, cfg.dt_plant, u_ref);
      BehaviorRequest rq;
      rq.vehicle_id = sc.fast_lane[i].id;
      rq.state = sc.fast_lane[i].state;
      rq.params = sc.fast_lane[i].params;
      rq.reference = &slice;
      rq.p = agents[i].p;
      rq.predecessor = pred;
      rq.safety = sc.safety;
      rq.disruption = cfg.disruption;
      rq.tol = cfg.tol;
      BehaviorResult br = actual_trajectory(rq);
      if (br.status != SolveStatus::Ok) {
        res.reason = "behavior infeasible for vehicle " + std::to_string(rq.vehicle_id);
        record_states(t_k);
        return res;
      }
      behav[i] = std::move(br.trajectory);
      pred = &behav[i];
    }
  }

  // Compliance measurement keeps its cadence until the maneuver ends: the
  // controllers update at every sampling instant the lateral move spans.
  {
    int j = 0;
    int s = 0;
    while (j < lat_steps) {
      const int burst = std::min(steps_per_sample, lat_steps - j);
      for (int b = 0; b < burst; ++b, ++j)
        plant_step(t_lat + cfg.dt_plant * static_cast<double>(j));
      if (burst < steps_per_sample) break;
      ++s;
      const double t_s = t_lat + cfg.dt_sample * static_cast<double>(s);
      std::vector<double> errors(n_lane);
      for (std::size_t i = 0; i < n_lane; ++i) {
        const TrajectorySample smp = sample(refs[i], t_s);
        VehicleState ref_state = sc.fast_lane[i].state;
        ref_state.x = smp.x;
        ref_state.v = smp.v;
        errors[i] = measure_error(sc.fast_lane[i].state, ref_state);
      }
      record_references(t_s);
      if (cfg.controller_mode != ControllerMode::None) {
        ComplianceStep st =
            step_all(std::move(agents), global_cost, errors, cfg.compliance,
                     cfg.controller_mode);
        agents = std::move(st.agents);
        global_cost = st.global_cost;
      }
      record_compliance(t_s);
    }
  }
  record_states(t_final);

  res.feasible = true;
  res.t_lateral = t_lat;
  res.t_final = t_final;
  res.maneuver_time = t_final - t0;
  res.final_pair = pair;
  if (pair.lead) res.pair_lead_id = sc.fast_lane[*pair.lead].id;
  if (pair.rear) res.pair_rear_id = sc.fast_lane[*pair.rear].id;
  res.lateral = lat;
  res.executed_energy = energy;

  auto energy_of_id = [&](int id) {
    for (const auto& e : energy)
      if (e.first == id) return e.second;
    return 0.0;
  };
  double te = energy_of_id(sc.merger.id);
  if (pair.lead) te += energy_of_id(sc.fast_lane[*pair.lead].id);
  if (pair.rear) te += energy_of_id(sc.fast_lane[*pair.rear].id);
  res.triplet_energy = te;

  res.disruption.emplace_back(
      sc.merger.id, speed_disruption(sc.merger.state.v, sc.merger.params.v_desired));
  for (const Vehicle& veh : sc.fast_lane)
    res.disruption.emplace_back(veh.id,
                                speed_disruption(veh.state.v, veh.params.v_desired));
  return res;
}

struct SweepRow {
  double q = 0.0;
  bool control_on = true;
  std::optional<double> maneuver_time;
  std::optional<double> energy;
};

// Re-run the maneuver across initial commitment levels of one human-driven
// vehicle (default: the rearmost one), once with the configured controller and
// once with no compliance control at all. Rows: level ascending, control first.
inline std::vector<SweepRow> sweep_initial_compliance(
    const Scenario& sc, std::vector<double> levels, const SimConfig& cfg,
    std::optional<int> vehicle_id = std::nullopt) {
  std::optional<std::size_t> target;
  for (std::size_t i = 0; i < sc.fast_lane.size(); ++i) {
    if (vehicle_id) {
      if (sc.fast_lane[i].id == *vehicle_id) target = i;
    } else if (sc.fast_lane[i].cls == VehicleClass::Hdv) {
      target = i;  // keep the rearmost (fast lane is ordered front to back)
    }
  }
  if (!target)
    throw ValidationError("sweep.vehicle",
                          vehicle_id ? "no fast-lane vehicle with that id"
                                     : "scenario has no human-driven vehicle");
  for (double q : levels)
    if (q < 0.0 || q > 1.0)
      throw ValidationError("sweep.levels", "levels must lie in [0, 1]");
  std::sort(levels.begin(), levels.end());

  std::vector<SweepRow> rows;
  for (double q : levels) {
    Scenario s2 = sc;
    s2.fast_lane[*target].q = q;
    for (bool control_on : {true, false}) {
      SimConfig c2 = cfg;
      c2.controller_mode = control_on ? cfg.controller_mode : ControllerMode::None;
      const ManeuverResult r = run_maneuver(s2, c2);
      SweepRow row;
      row.q = q;
      row.control_on = control_on;
      row.maneuver_time = r.maneuver_time;
      row.energy = r.triplet_energy;
      rows.push_back(row);
    }
  }
  return rows;
}

struct AblationResult {
  ManeuverResult both;
  ManeuverResult local_only;
  ManeuverResult global_only;
};

// Same scenario under the three controller configurations.
inline AblationResult ablation_run(const Scenario& sc, SimConfig cfg) {
  AblationResult r;
  cfg.controller_mode = ControllerMode::Both;
  r.both = run_maneuver(sc, cfg);
  cfg.controller_mode = ControllerMode::LocalOnly;
  r.local_only = run_maneuver(sc, cfg);
  cfg.controller_mode = ControllerMode::GlobalOnly;
  r.global_only = run_maneuver(sc, cfg);
  return r;
}

}  // namespace ccc
