#pragma once

// Scenario ingestion and result serialization. Scenario files are strict JSON:
// unknown fields are rejected, omitted fields take documented defaults and
// every applied default is echoed back. Traces go to fixed-layout CSV files;
// metric reports mirror infeasible entries as the string "Inf".

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ccc/compliance.hpp"
#include "ccc/scenario.hpp"
#include "ccc/sim.hpp"

namespace ccc {

using Json = nlohmann::json;

struct ScenarioFile {
  Scenario scenario;
  SimConfig sim;
  std::vector<std::string> applied_defaults;
};

namespace io_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path, what);
}

inline void reject_unknown(const Json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known) fail(path + "." + item.key(), "unknown field");
  }
}

inline double require_num(const Json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) fail(path + "." + key, "missing required field");
  const Json& v = j.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

inline double num_or(const Json& j, const char* key, double def,
                     const std::string& path, std::vector<std::string>& log) {
  if (!j.contains(key)) {
    log.push_back(path + "." + key + " = " + Json(def).dump());
    return def;
  }
  const Json& v = j.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

inline std::string str_or(const Json& j, const char* key, const std::string& def,
                          const std::string& path, std::vector<std::string>& log) {
  if (!j.contains(key)) {
    log.push_back(path + "." + key + " = \"" + def + "\"");
    return def;
  }
  const Json& v = j.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

}  // namespace io_detail

inline std::string to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::Both: return "both";
    case ControllerMode::GlobalOnly: return "global";
    case ControllerMode::LocalOnly: return "local";
    case ControllerMode::None: return "none";
  }
  return "both";
}

inline ControllerMode controller_mode_from(const std::string& s,
                                           const std::string& path) {
  if (s == "both") return ControllerMode::Both;
  if (s == "global") return ControllerMode::GlobalOnly;
  if (s == "local") return ControllerMode::LocalOnly;
  if (s == "none") return ControllerMode::None;
  io_detail::fail(path, "expected one of both|global|local|none");
}

inline std::string to_string(MeasurementMode m) {
  return m == MeasurementMode::Microscopic ? "microscopic" : "macroscopic";
}

inline std::string to_string(DisruptionMode m) {
  return m == DisruptionMode::Terminal ? "terminal" : "running";
}

inline std::string to_string(VehicleClass c) {
  switch (c) {
    case VehicleClass::Cav: return "cav";
    case VehicleClass::Hdv: return "hdv";
    case VehicleClass::Obstacle: return "obstacle";
  }
  return "cav";
}

// Build validated domain objects from a parsed scenario document.
inline ScenarioFile parse_scenario(const Json& j) {
  using io_detail::fail;
  using io_detail::num_or;
  using io_detail::reject_unknown;
  using io_detail::require_num;
  using io_detail::str_or;

  ScenarioFile out;
  auto& log = out.applied_defaults;

  reject_unknown(j, "scenario",
                 {"schema_version", "road", "safety", "compliance", "weights",
                  "sim", "t0", "vehicles"});
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer())
    fail("scenario.schema_version", "required integer");
  if (j.at("schema_version").get<int>() != 1)
    fail("scenario.schema_version", "unsupported version (expected 1)");

  out.scenario.t0 = num_or(j, "t0", 0.0, "scenario", log);

  const Json road = j.value("road", Json::object());
  reject_unknown(road, "road", {"lane_width", "sensor_range_rear", "sensor_range_fwd"});
  RoadGeometry rg;
  rg.lane_width = num_or(road, "lane_width", rg.lane_width, "road", log);
  rg.sensor_range_rear =
      num_or(road, "sensor_range_rear", rg.sensor_range_rear, "road", log);
  rg.sensor_range_fwd =
      num_or(road, "sensor_range_fwd", rg.sensor_range_fwd, "road", log);
  out.scenario.road = rg;

  const Json safety = j.value("safety", Json::object());
  reject_unknown(safety, "safety", {"reaction_time", "standstill_gap"});
  SafetyParams sp;
  sp.reaction_time = num_or(safety, "reaction_time", sp.reaction_time, "safety", log);
  sp.standstill_gap =
      num_or(safety, "standstill_gap", sp.standstill_gap, "safety", log);
  out.scenario.safety = sp;

  const Json comp = j.value("compliance", Json::object());
  reject_unknown(comp, "compliance",
                 {"q_star", "alpha", "beta", "gamma", "w_q", "w_c", "w_i", "e_max",
                  "measurement"});
  ComplianceConfig cc;
  cc.q_star = num_or(comp, "q_star", cc.q_star, "compliance", log);
  cc.alpha = num_or(comp, "alpha", cc.alpha, "compliance", log);
  cc.beta = num_or(comp, "beta", cc.beta, "compliance", log);
  cc.gamma = num_or(comp, "gamma", cc.gamma, "compliance", log);
  cc.w_q = num_or(comp, "w_q", cc.w_q, "compliance", log);
  cc.w_c = num_or(comp, "w_c", cc.w_c, "compliance", log);
  cc.w_i = num_or(comp, "w_i", cc.w_i, "compliance", log);
  cc.e_max = num_or(comp, "e_max", cc.e_max, "compliance", log);
  const std::string meas =
      str_or(comp, "measurement", "microscopic", "compliance", log);
  if (meas == "microscopic")
    cc.measurement = MeasurementMode::Microscopic;
  else if (meas == "macroscopic")
    cc.measurement = MeasurementMode::Macroscopic;
  else
    fail("compliance.measurement", "expected microscopic|macroscopic");

  const Json weights = j.value("weights", Json::object());
  reject_unknown(weights, "weights", {"alpha_t", "alpha_u", "alpha_v", "alpha_phi"});
  CostWeights cw;
  cw.alpha_t = num_or(weights, "alpha_t", cw.alpha_t, "weights", log);
  cw.alpha_u = num_or(weights, "alpha_u", cw.alpha_u, "weights", log);
  cw.alpha_v = num_or(weights, "alpha_v", cw.alpha_v, "weights", log);
  cw.alpha_phi = num_or(weights, "alpha_phi", cw.alpha_phi, "weights", log);

  const Json sim = j.value("sim", Json::object());
  reject_unknown(sim, "sim",
                 {"dt_sample", "dt_plant", "t_max", "controller_mode", "disruption",
                  "time_step", "tol"});
  SimConfig sim_cfg;
  sim_cfg.dt_sample = num_or(sim, "dt_sample", sim_cfg.dt_sample, "sim", log);
  sim_cfg.dt_plant = num_or(sim, "dt_plant", sim_cfg.dt_plant, "sim", log);
  sim_cfg.t_max = num_or(sim, "t_max", sim_cfg.t_max, "sim", log);
  sim_cfg.controller_mode = controller_mode_from(
      str_or(sim, "controller_mode", "both", "sim", log), "sim.controller_mode");
  const std::string disr = str_or(sim, "disruption", "terminal", "sim", log);
  if (disr == "terminal")
    sim_cfg.disruption = DisruptionMode::Terminal;
  else if (disr == "running")
    sim_cfg.disruption = DisruptionMode::Running;
  else
    fail("sim.disruption", "expected terminal|running");
  sim_cfg.time_step = num_or(sim, "time_step", sim_cfg.time_step, "sim", log);
  sim_cfg.tol = num_or(sim, "tol", sim_cfg.tol, "sim", log);
  sim_cfg.compliance = cc;
  sim_cfg.weights = cw;
  out.sim = sim_cfg;

  if (!j.contains("vehicles") || !j.at("vehicles").is_array())
    fail("scenario.vehicles", "required array");
  std::optional<Vehicle> merger, obstacle;
  std::vector<Vehicle> lane;
  std::size_t idx = 0;
  for (const Json& vj : j.at("vehicles")) {
    const std::string path = "vehicles[" + std::to_string(idx++) + "]";
    reject_unknown(vj, path, {"id", "class", "state", "q", "params"});
    Vehicle veh;
    if (!vj.contains("id") || !vj.at("id").is_number_integer())
      fail(path + ".id", "required integer");
    veh.id = vj.at("id").get<int>();
    if (!vj.contains("class") || !vj.at("class").is_string())
      fail(path + ".class", "required string");
    const std::string cls = vj.at("class").get<std::string>();
    if (cls == "cav")
      veh.cls = VehicleClass::Cav;
    else if (cls == "hdv")
      veh.cls = VehicleClass::Hdv;
    else if (cls == "obstacle")
      veh.cls = VehicleClass::Obstacle;
    else
      fail(path + ".class", "expected cav|hdv|obstacle");
    if (!vj.contains("state") || !vj.at("state").is_array() ||
        vj.at("state").size() != 4)
      fail(path + ".state", "required [x, y, theta, v]");
    for (const Json& c : vj.at("state"))
      if (!c.is_number()) fail(path + ".state", "entries must be numbers");
    veh.state.x = vj.at("state")[0].get<double>();
    veh.state.y = vj.at("state")[1].get<double>();
    veh.state.theta = vj.at("state")[2].get<double>();
    veh.state.v = vj.at("state")[3].get<double>();
    veh.q = num_or(vj, "q", 1.0, path, log);
    const Json pj = vj.value("params", Json::object());
    reject_unknown(pj, path + ".params",
                   {"v_min", "v_max", "u_min", "u_max", "phi_min", "phi_max",
                    "wheelbase", "v_desired"});
    VehicleParams vp;
    const std::string pp = path + ".params";
    vp.v_min = num_or(pj, "v_min", vp.v_min, pp, log);
    vp.v_max = num_or(pj, "v_max", vp.v_max, pp, log);
    vp.u_min = num_or(pj, "u_min", vp.u_min, pp, log);
    vp.u_max = num_or(pj, "u_max", vp.u_max, pp, log);
    vp.phi_min = num_or(pj, "phi_min", vp.phi_min, pp, log);
    vp.phi_max = num_or(pj, "phi_max", vp.phi_max, pp, log);
    vp.wheelbase = num_or(pj, "wheelbase", vp.wheelbase, pp, log);
    vp.v_desired = num_or(pj, "v_desired", vp.v_desired, pp, log);
    veh.params = vp;

    const bool slow_lane = std::abs(veh.state.y) < rg.lane_width / 2.0;
    if (veh.cls == VehicleClass::Obstacle) {
      if (obstacle) fail(path, "more than one obstacle");
      obstacle = veh;
    } else if (veh.cls == VehicleClass::Cav && slow_lane) {
      if (merger) fail(path, "more than one merging vehicle in the slow lane");
      merger = veh;
    } else {
      lane.push_back(veh);
    }
  }
  if (!merger) fail("scenario.vehicles", "no merging vehicle (slow-lane cav)");
  if (!obstacle) fail("scenario.vehicles", "no slow-lane obstacle");
  std::stable_sort(lane.begin(), lane.end(),
                   [](const Vehicle& a, const Vehicle& b) { return a.state.x > b.state.x; });
  out.scenario.merger = *merger;
  out.scenario.obstacle = *obstacle;
  out.scenario.fast_lane = std::move(lane);
  out.scenario.validate();
  out.sim.validate();
  return out;
}

inline ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_detail::fail(path, "cannot open scenario file");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    io_detail::fail(path, std::string("parse error: ") + e.what());
  }
  return parse_scenario(j);
}

// Canonical full-form document; load(to_json(x)) reproduces x.
inline Json to_json(const Scenario& sc, const SimConfig& cfg) {
  Json j;
  j["schema_version"] = 1;
  j["t0"] = sc.t0;
  j["road"] = {{"lane_width", sc.road.lane_width},
               {"sensor_range_rear", sc.road.sensor_range_rear},
               {"sensor_range_fwd", sc.road.sensor_range_fwd}};
  j["safety"] = {{"reaction_time", sc.safety.reaction_time},
                 {"standstill_gap", sc.safety.standstill_gap}};
  const ComplianceConfig& cc = cfg.compliance;
  j["compliance"] = {{"q_star", cc.q_star}, {"alpha", cc.alpha},
                     {"beta", cc.beta},     {"gamma", cc.gamma},
                     {"w_q", cc.w_q},       {"w_c", cc.w_c},
                     {"w_i", cc.w_i},       {"e_max", cc.e_max},
                     {"measurement", to_string(cc.measurement)}};
  j["weights"] = {{"alpha_t", cfg.weights.alpha_t},
                  {"alpha_u", cfg.weights.alpha_u},
                  {"alpha_v", cfg.weights.alpha_v},
                  {"alpha_phi", cfg.weights.alpha_phi}};
  j["sim"] = {{"dt_sample", cfg.dt_sample},
              {"dt_plant", cfg.dt_plant},
              {"t_max", cfg.t_max},
              {"controller_mode", to_string(cfg.controller_mode)},
              {"disruption", to_string(cfg.disruption)},
              {"time_step", cfg.time_step},
              {"tol", cfg.tol}};
  Json vehicles = Json::array();
  auto emit = [&](const Vehicle& v) {
    Json vj;
    vj["id"] = v.id;
    vj["class"] = to_string(v.cls);
    vj["state"] = {v.state.x, v.state.y, v.state.theta, v.state.v};
    vj["q"] = v.q;
    vj["params"] = {{"v_min", v.params.v_min},       {"v_max", v.params.v_max},
                    {"u_min", v.params.u_min},       {"u_max", v.params.u_max},
                    {"phi_min", v.params.phi_min},   {"phi_max", v.params.phi_max},
                    {"wheelbase", v.params.wheelbase},
                    {"v_desired", v.params.v_desired}};
    vehicles.push_back(vj);
  };
  for (const Vehicle& v : sc.fast_lane) emit(v);
  emit(sc.merger);
  emit(sc.obstacle);
  j["vehicles"] = vehicles;
  return j;
}

inline void save_scenario(const std::string& path, const Scenario& sc,
                          const SimConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(sc, cfg).dump(2) << "\n";
}

// Full-precision decimal rendering used by every CSV cell.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_positions_csv(const std::string& path,
                                const std::vector<StateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,id,x,y,theta,v,u\n";
  for (const StateRow& r : rows)
    out << g17(r.t) << ',' << r.id << ',' << g17(r.x) << ',' << g17(r.y) << ','
        << g17(r.theta) << ',' << g17(r.v) << ',' << g17(r.u) << '\n';
}

inline void write_compliance_csv(const std::string& path,
                                 const std::vector<ComplianceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,id,M,M_bar,P,c,C_global\n";
  for (const ComplianceRow& r : rows)
    out << g17(r.t) << ',' << r.id << ',' << g17(r.m) << ',' << g17(r.m_bar) << ','
        << g17(r.p) << ',' << g17(r.c) << ',' << g17(r.c_global) << '\n';
}

inline void write_references_csv(const std::string& path,
                                 const std::vector<ReferenceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,id,x_ref,v_ref,u_ref\n";
  for (const ReferenceRow& r : rows)
    out << g17(r.t) << ',' << r.id << ',' << g17(r.x_ref) << ',' << g17(r.v_ref)
        << ',' << g17(r.u_ref) << '\n';
}

inline void write_sweep_csv(const std::string& path,
                            const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "q,mode,maneuver_time,energy\n";
  for (const SweepRow& r : rows) {
    out << g17(r.q) << ',' << (r.control_on ? "control" : "none") << ',';
    out << (r.maneuver_time ? g17(*r.maneuver_time) : "Inf") << ',';
    out << (r.energy ? g17(*r.energy) : "Inf") << '\n';
  }
}

inline Json metrics_json(const ManeuverResult& r) {
  Json m;
  m["feasible"] = r.feasible;
  m["maneuver_time"] = r.maneuver_time ? Json(*r.maneuver_time) : Json("Inf");
  m["triplet_energy"] = r.triplet_energy ? Json(*r.triplet_energy) : Json("Inf");
  m["t_lateral"] = r.t_lateral ? Json(*r.t_lateral) : Json("Inf");
  m["t_final"] = r.t_final ? Json(*r.t_final) : Json("Inf");
  if (!r.feasible) m["reason"] = r.reason;
  m["pair"] = {{"lead", r.pair_lead_id ? Json(*r.pair_lead_id) : Json(nullptr)},
               {"rear", r.pair_rear_id ? Json(*r.pair_rear_id) : Json(nullptr)}};
  Json d = Json::object();
  for (const auto& [id, val] : r.disruption) d[std::to_string(id)] = val;
  m["disruption"] = d;
  return m;
}

struct RunReport {
  Json metrics;
  std::vector<std::string> trace_paths;
};

inline RunReport write_traces(const ManeuverResult& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  RunReport rep;
  const std::string pos = (fs::path(out_dir) / "positions.csv").string();
  const std::string comp = (fs::path(out_dir) / "compliance.csv").string();
  const std::string ref = (fs::path(out_dir) / "references.csv").string();
  const std::string met = (fs::path(out_dir) / "metrics.json").string();
  write_positions_csv(pos, r.states);
  write_compliance_csv(comp, r.compliance);
  write_references_csv(ref, r.references);
  rep.metrics = metrics_json(r);
  std::ofstream out(met);
  if (!out) throw std::runtime_error("cannot write " + met);
  out << rep.metrics.dump(2) << "\n";
  rep.trace_paths = {pos, comp, ref, met};
  return rep;
}

}  // namespace ccc
