#pragma once

// Vehicle and scenario value types for the mixed-traffic lane-change model:
// a controlled CAV in the slow lane, a slower obstacle ahead of it, and an
// ordered platoon of fast-lane vehicles it wants to merge into.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccc {

struct VehicleState {
  double x = 0.0;      // longitudinal position (m)
  double y = 0.0;      // lateral position (m), slow lane centered at 0
  double theta = 0.0;  // heading (rad)
  double v = 0.0;      // speed (m/s)
};

struct ControlInput {
  double u = 0.0;    // longitudinal acceleration (m/s^2)
  double phi = 0.0;  // steering angle (rad)
};

struct VehicleParams {
  double v_min = 15.0;
  double v_max = 35.0;
  double u_min = -7.0;
  double u_max = 3.3;
  double phi_min = -0.2;
  double phi_max = 0.2;
  double wheelbase = 2.5;   // m
  double v_desired = 30.0;  // m/s
};

struct SafetyParams {
  double reaction_time = 0.6;   // s, speed-proportional headway
  double standstill_gap = 1.5;  // m, constant offset
};

struct RoadGeometry {
  double lane_width = 4.0;           // m, slow lane at y=0, fast lane at y=lane_width
  double sensor_range_rear = 100.0;  // m behind the merging vehicle
  double sensor_range_fwd = 100.0;   // m beyond the obstacle
};

enum class VehicleClass { Cav, Hdv, Obstacle };

struct Vehicle {
  int id = 0;
  VehicleClass cls = VehicleClass::Hdv;
  VehicleState state;
  VehicleParams params;
  double q = 1.0;  // initial compliance proclivity in [0,1]; 1 for CAVs
};

// Thrown for invalid inputs; `path` names the offending field.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Thrown when an integration step leaves the admissible speed range.
class BoundViolation : public std::runtime_error {
 public:
  BoundViolation(std::string component, double value, double lo, double hi)
      : std::runtime_error(component + "=" + std::to_string(value) +
                           " outside [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]"),
        component_(std::move(component)) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

// Speed-dependent headway a follower must keep: reaction_time * v + standstill_gap.
inline double safety_distance(double v, const SafetyParams& sp) {
  if (v < 0.0) throw std::domain_error("safety_distance: negative speed");
  return sp.reaction_time * v + sp.standstill_gap;
}

// Quadratic penalty for ending away from the desired speed.
inline double speed_disruption(double v, double v_desired) {
  const double dv = v - v_desired;
  return dv * dv;
}

// One forward-Euler step of the kinematic model. With theta=0 and phi=0 this
// reduces to the double integrator x += v dt, v += u dt used by the planners.
inline VehicleState step_dynamics(const VehicleState& s, const ControlInput& in,
                                  double wheelbase, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step_dynamics: dt must be > 0");
  VehicleState n;
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  n.x = s.x + (s.v * c - s.v * sn * in.phi) * dt;
  n.y = s.y + (s.v * sn + s.v * c * in.phi) * dt;
  n.theta = s.theta + (s.v / wheelbase) * in.phi * dt;
  n.v = s.v + in.u * dt;
  return n;
}

// Checked step: reports (never clamps) a speed-bound violation.
inline VehicleState step_dynamics(const VehicleState& s, const ControlInput& in,
                                  const VehicleParams& p, double dt) {
  VehicleState n = step_dynamics(s, in, p.wheelbase, dt);
  constexpr double kTol = 1e-9;
  if (n.v < p.v_min - kTol || n.v > p.v_max + kTol)
    throw BoundViolation("v", n.v, p.v_min, p.v_max);
  return n;
}

struct Scenario {
  RoadGeometry road;
  SafetyParams safety;
  std::vector<Vehicle> fast_lane;  // ordered front to back: strictly decreasing x
  Vehicle merger;                  // the lane-changing CAV, slow lane
  Vehicle obstacle;                // slower vehicle ahead of the merger, slow lane
  double t0 = 0.0;

  // Throws ValidationError unless the configuration is well formed and
  // initially safe (all adjacent headways and the merger-obstacle gap hold).
  void validate() const {
    if (road.lane_width <= 0.0)
      throw ValidationError("road.lane_width", "must be > 0");
    if (road.sensor_range_rear <= 0.0 || road.sensor_range_fwd <= 0.0)
      throw ValidationError("road.sensor_range", "must be > 0");
    if (safety.reaction_time < 0.0 || safety.standstill_gap < 0.0)
      throw ValidationError("safety", "parameters must be >= 0");

    auto check_vehicle = [&](const Vehicle& veh, const std::string& path) {
      const VehicleParams& p = veh.params;
      if (p.v_min > p.v_max) throw ValidationError(path + ".params", "v_min > v_max");
      if (p.u_min > p.u_max) throw ValidationError(path + ".params", "u_min > u_max");
      if (p.phi_min > p.phi_max)
        throw ValidationError(path + ".params", "phi_min > phi_max");
      if (p.wheelbase <= 0.0)
        throw ValidationError(path + ".params.wheelbase", "must be > 0");
      if (veh.state.v < p.v_min || veh.state.v > p.v_max)
        throw ValidationError(path + ".state.v", "outside [v_min, v_max]");
      if (veh.q < 0.0 || veh.q > 1.0)
        throw ValidationError(path + ".q", "must be in [0, 1]");
    };

    check_vehicle(merger, "merger");
    if (merger.cls != VehicleClass::Cav)
      throw ValidationError("merger.class", "lane changer must be a CAV");
    if (std::abs(merger.state.y) >= road.lane_width / 2.0)
      throw ValidationError("merger.state.y", "must start in the slow lane");

    check_vehicle(obstacle, "obstacle");
    if (obstacle.cls != VehicleClass::Obstacle)
      throw ValidationError("obstacle.class", "must be an obstacle");
    if (std::abs(obstacle.state.y) >= road.lane_width / 2.0)
      throw ValidationError("obstacle.state.y", "must be in the slow lane");
    if (obstacle.state.x <= merger.state.x)
      throw ValidationError("obstacle.state.x", "must be ahead of the merger");
    const double gap_cu = obstacle.state.x - merger.state.x;
    if (gap_cu < safety_distance(merger.state.v, safety))
      throw ValidationError("obstacle.state.x", "initial merger headway violated");

    std::vector<int> ids{merger.id, obstacle.id};
    for (std::size_t i = 0; i < fast_lane.size(); ++i) {
      const Vehicle& veh = fast_lane[i];
      const std::string path = "fast_lane[" + std::to_string(i) + "]";
      check_vehicle(veh, path);
      if (veh.cls == VehicleClass::Obstacle)
        throw ValidationError(path + ".class", "fast lane holds CAVs/HDVs only");
      if (std::abs(veh.state.y - road.lane_width) >= road.lane_width / 2.0)
        throw ValidationError(path + ".state.y", "must be in the fast lane");
      ids.push_back(veh.id);
      if (i > 0) {
        const Vehicle& ahead = fast_lane[i - 1];
        if (ahead.state.x <= veh.state.x)
          throw ValidationError(path + ".state.x",
                                "fast lane must be ordered by decreasing x");
        const double gap = ahead.state.x - veh.state.x;
        if (gap < safety_distance(veh.state.v, safety))
          throw ValidationError(path + ".state.x", "initial headway violated");
      }
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = i + 1; j < ids.size(); ++j)
        if (ids[i] == ids[j])
          throw ValidationError("vehicles.id",
                                "duplicate id " + std::to_string(ids[i]));
  }
};

}  // namespace ccc
