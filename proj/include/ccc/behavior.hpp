#pragma once

// Links compliance probability to motion. Every fast-lane vehicle executes the
// trajectory that minimizes a P-weighted blend of following its reference
// control and acting selfishly (no effort, hold its own desired speed), always
// subject to the headway constraint against the vehicle ahead. Controllable
// vehicles are requests with P = 1 and reproduce their reference.

#include <cstddef>

#include "ccc/scenario.hpp"
#include "ccc/trajectory_opt.hpp"

namespace ccc {

// Non-owning request; `reference` is required, `predecessor` optional (the
// already-resolved actual path of the vehicle directly ahead).
struct BehaviorRequest {
  int vehicle_id = 0;
  VehicleState state;
  VehicleParams params;
  const Trajectory* reference = nullptr;
  double p = 1.0;
  const Trajectory* predecessor = nullptr;
  SafetyParams safety;
  DisruptionMode disruption = DisruptionMode::Terminal;
  double tol = 1e-8;
};

struct BehaviorResult {
  SolveStatus status = SolveStatus::Ok;
  int vehicle_id = 0;
  Trajectory trajectory;
};

inline BehaviorResult actual_trajectory(const BehaviorRequest& req) {
  if (req.reference == nullptr || req.reference->intervals() == 0)
    throw ValidationError("behavior.reference", "required");
  OcpSpec spec;
  spec.x0 = req.state.x;
  spec.v0 = req.state.v;
  spec.t_start = req.reference->t_start;
  spec.t_end = req.reference->t_end();
  spec.n_grid = static_cast<int>(req.reference->intervals());
  spec.params = req.params;
  if (req.predecessor)
    spec.headways.push_back(headway_against(*req.predecessor, false, false, req.safety));
  const OcpResult r =
      solve_hdv_behavior_ocp(*req.reference, req.p, spec, req.disruption, req.tol);
  return BehaviorResult{r.status, req.vehicle_id, r.trajectory};
}

}  // namespace ccc
