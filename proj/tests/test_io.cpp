#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <ccc/io.hpp>

using namespace ccc;
namespace fs = std::filesystem;

namespace {

ScenarioFile default_file() {
  return load_scenario(std::string(CCC_SCENARIO_DIR) + "/paper_default.json");
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("ccc_io_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Path reported by the first validation failure, or a marker when none fires.
std::string rejected_path(const Json& doc) {
  try {
    (void)parse_scenario(doc);
  } catch (const ValidationError& e) {
    return e.path();
  }
  return "<accepted>";
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string("\"") + CCC_CLI_BIN + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("canonical document reproduces the loaded scenario exactly") {
  const ScenarioFile f = default_file();
  // the shipped file leans on defaults only for the solver knobs and the
  // obstacle's unused limits: 2 sim fields + q + 8 params
  CHECK(f.applied_defaults.size() == 11);

  const Json doc = to_json(f.scenario, f.sim);
  const ScenarioFile back = parse_scenario(doc);
  CHECK(back.applied_defaults.empty());

  // field-exact round trip: re-serializing yields the identical document
  CHECK(to_json(back.scenario, back.sim) == doc);

  // spot-check a few fields made it into domain objects unchanged
  CHECK(back.scenario.t0 == f.scenario.t0);
  CHECK(back.scenario.road.lane_width == f.scenario.road.lane_width);
  CHECK(back.sim.dt_sample == f.sim.dt_sample);
  CHECK(back.sim.compliance.gamma == f.sim.compliance.gamma);
  CHECK(back.sim.weights.alpha_phi == f.sim.weights.alpha_phi);
  REQUIRE(back.scenario.fast_lane.size() == f.scenario.fast_lane.size());
  for (std::size_t i = 0; i < f.scenario.fast_lane.size(); ++i) {
    const Vehicle& a = f.scenario.fast_lane[i];
    const Vehicle& b = back.scenario.fast_lane[i];
    CHECK(b.id == a.id);
    CHECK(b.cls == a.cls);
    CHECK(b.q == a.q);
    CHECK(b.state.x == a.state.x);
    CHECK(b.state.v == a.state.v);
    CHECK(b.params.v_desired == a.params.v_desired);
  }
}

TEST_CASE("saving and reloading a scenario file preserves it") {
  const ScenarioFile f = default_file();
  const fs::path dir = fresh_dir("save");
  const fs::path path = dir / "copy.json";
  save_scenario(path.string(), f.scenario, f.sim);

  const ScenarioFile back = load_scenario(path.string());
  CHECK(back.applied_defaults.empty());
  CHECK(to_json(back.scenario, back.sim) == to_json(f.scenario, f.sim));
}

TEST_CASE("omitted fields take documented defaults and are echoed") {
  Json doc;
  doc["schema_version"] = 1;
  doc["vehicles"] = Json::array({
      Json{{"id", 6}, {"class", "cav"}, {"state", {0.0, 0.0, 0.0, 20.0}}},
      Json{{"id", 7}, {"class", "obstacle"}, {"state", {60.0, 0.0, 0.0, 20.0}}},
      Json{{"id", 1}, {"class", "hdv"}, {"state", {10.0, 4.0, 0.0, 20.0}}},
  });

  const ScenarioFile f = parse_scenario(doc);

  // every omitted scalar is defaulted once and logged once:
  // t0 + road(3) + safety(2) + compliance(9) + weights(4) + sim(7)
  // + per-vehicle q and 8 params (3 vehicles)
  CHECK(f.applied_defaults.size() == 26 + 3 * 9);
  const auto has = [&](const std::string& entry) {
    return std::find(f.applied_defaults.begin(), f.applied_defaults.end(),
                     entry) != f.applied_defaults.end();
  };
  CHECK(has("scenario.t0 = 0.0"));
  CHECK(has("road.lane_width = 4.0"));
  CHECK(has("safety.reaction_time = 0.6"));
  CHECK(has("compliance.measurement = \"microscopic\""));
  CHECK(has("sim.controller_mode = \"both\""));
  CHECK(has("vehicles[0].q = 1.0"));
  CHECK(has("vehicles[2].params.v_desired = 30.0"));

  CHECK(f.scenario.merger.id == 6);
  CHECK(f.scenario.obstacle.id == 7);
  REQUIRE(f.scenario.fast_lane.size() == 1);
  CHECK(f.scenario.fast_lane[0].id == 1);
  CHECK(f.scenario.fast_lane[0].q == 1.0);
  CHECK(f.sim.t_max == 10.0);
  CHECK(f.sim.controller_mode == ControllerMode::Both);
  CHECK(f.sim.compliance.gamma == 0.7);
  CHECK(f.sim.weights.alpha_t == 0.6);
}

TEST_CASE("unknown fields are rejected with their full path") {
  const ScenarioFile f = default_file();
  const Json base = to_json(f.scenario, f.sim);

  Json top = base;
  top["bogus"] = 1;
  CHECK(rejected_path(top) == "scenario.bogus");

  Json road = base;
  road["road"]["curvature"] = 0.1;
  CHECK(rejected_path(road) == "road.curvature");

  Json comp = base;
  comp["compliance"]["gama"] = 0.5;
  CHECK(rejected_path(comp) == "compliance.gama");

  Json weights = base;
  weights["weights"]["alpha_x"] = 1.0;
  CHECK(rejected_path(weights) == "weights.alpha_x");

  Json sim = base;
  sim["sim"]["dt"] = 0.1;
  CHECK(rejected_path(sim) == "sim.dt");

  Json veh = base;
  veh["vehicles"][1]["lane"] = "fast";
  CHECK(rejected_path(veh) == "vehicles[1].lane");

  Json params = base;
  params["vehicles"][0]["params"]["v_top"] = 40.0;
  CHECK(rejected_path(params) == "vehicles[0].params.v_top");

  // the exception message carries the path too
  try {
    (void)parse_scenario(top);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == "scenario.bogus: unknown field");
  }
}

TEST_CASE("malformed documents are rejected") {
  const ScenarioFile f = default_file();
  const Json base = to_json(f.scenario, f.sim);

  Json no_version = base;
  no_version.erase("schema_version");
  CHECK(rejected_path(no_version) == "scenario.schema_version");

  Json bad_version = base;
  bad_version["schema_version"] = 2;
  CHECK(rejected_path(bad_version) == "scenario.schema_version");

  Json no_vehicles = base;
  no_vehicles.erase("vehicles");
  CHECK(rejected_path(no_vehicles) == "scenario.vehicles");

  Json short_state = base;
  short_state["vehicles"][0]["state"] = {1.0, 2.0, 3.0};
  CHECK(rejected_path(short_state) == "vehicles[0].state");

  Json text_state = base;
  text_state["vehicles"][0]["state"] = {1.0, 2.0, 3.0, "fast"};
  CHECK(rejected_path(text_state) == "vehicles[0].state");

  Json bad_class = base;
  bad_class["vehicles"][0]["class"] = "truck";
  CHECK(rejected_path(bad_class) == "vehicles[0].class");

  Json text_number = base;
  text_number["road"]["lane_width"] = "wide";
  CHECK(rejected_path(text_number) == "road.lane_width");

  Json bad_measurement = base;
  bad_measurement["compliance"]["measurement"] = "fuzzy";
  CHECK(rejected_path(bad_measurement) == "compliance.measurement");

  Json bad_mode = base;
  bad_mode["sim"]["controller_mode"] = "auto";
  CHECK(rejected_path(bad_mode) == "sim.controller_mode");

  Json bad_disruption = base;
  bad_disruption["sim"]["disruption"] = "sometimes";
  CHECK(rejected_path(bad_disruption) == "sim.disruption");

  // duplicate roles: a second slow-lane cav and a second obstacle
  const auto entry_with = [&](const char* cls, bool slow_lane) {
    for (const Json& vj : base["vehicles"])
      if (vj["class"] == cls &&
          (std::abs(vj["state"][1].get<double>()) < 2.0) == slow_lane)
        return vj;
    FAIL("missing role in the shipped scenario");
    return Json{};
  };
  const std::string dup_path =
      "vehicles[" + std::to_string(base["vehicles"].size()) + "]";
  Json two_mergers = base;
  {
    Json extra = entry_with("cav", true);
    extra["id"] = 99;
    extra["state"][0] = extra["state"][0].get<double>() - 5.0;
    two_mergers["vehicles"].push_back(extra);
    CHECK(rejected_path(two_mergers) == dup_path);
  }
  Json two_obstacles = base;
  {
    Json extra = entry_with("obstacle", true);
    extra["id"] = 98;
    extra["state"][0] = extra["state"][0].get<double>() + 5.0;
    two_obstacles["vehicles"].push_back(extra);
    CHECK(rejected_path(two_obstacles) == dup_path);
  }

  Json no_merger = base;
  {
    Json pruned = Json::array();
    for (const Json& vj : no_merger["vehicles"])
      if (vj["class"] != "cav" || std::abs(vj["state"][1].get<double>()) >= 2.0)
        pruned.push_back(vj);
    no_merger["vehicles"] = pruned;
    CHECK(rejected_path(no_merger) == "scenario.vehicles");
  }
}

TEST_CASE("fast-lane vehicles are ordered front to back regardless of input order") {
  const ScenarioFile f = default_file();
  Json doc = to_json(f.scenario, f.sim);

  // reverse the vehicle array; classification and ordering must not change
  Json reversed = Json::array();
  for (auto it = doc["vehicles"].rbegin(); it != doc["vehicles"].rend(); ++it)
    reversed.push_back(*it);
  doc["vehicles"] = reversed;

  const ScenarioFile back = parse_scenario(doc);
  CHECK(back.scenario.merger.id == f.scenario.merger.id);
  CHECK(back.scenario.obstacle.id == f.scenario.obstacle.id);
  REQUIRE(back.scenario.fast_lane.size() == f.scenario.fast_lane.size());
  for (std::size_t i = 0; i < f.scenario.fast_lane.size(); ++i)
    CHECK(back.scenario.fast_lane[i].id == f.scenario.fast_lane[i].id);
  for (std::size_t i = 1; i < back.scenario.fast_lane.size(); ++i)
    CHECK(back.scenario.fast_lane[i - 1].state.x >=
          back.scenario.fast_lane[i].state.x);
}

TEST_CASE("full-precision cells survive a csv round trip") {
  const fs::path dir = fresh_dir("csv");

  const std::vector<StateRow> states = {
      {0.1, 1, 1.0 / 3.0, -2.5e-17, 3.141592653589793, 27.0, -0.30000000000000004},
      {0.2, 42, 1.2345678901234567e+300, 0.0, -1e-9, 15.123456789012345, 3.3},
  };
  const fs::path pos = dir / "positions.csv";
  write_positions_csv(pos.string(), states);
  auto rows = read_csv(pos);
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0] == std::vector<std::string>{"t", "id", "x", "y", "theta", "v", "u"});
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StateRow& s = states[i];
    const auto& r = rows[i + 1];
    REQUIRE(r.size() == 7);
    CHECK(std::stod(r[0]) == s.t);
    CHECK(std::stoi(r[1]) == s.id);
    CHECK(std::stod(r[2]) == s.x);
    CHECK(std::stod(r[3]) == s.y);
    CHECK(std::stod(r[4]) == s.theta);
    CHECK(std::stod(r[5]) == s.v);
    CHECK(std::stod(r[6]) == s.u);
  }

  const std::vector<ComplianceRow> comp = {
      {0.25, 4, 0.9999999999999999, 0.7, 0.38, 0.030000000000000002, 0.05}};
  const fs::path cpath = dir / "compliance.csv";
  write_compliance_csv(cpath.string(), comp);
  rows = read_csv(cpath);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0] ==
          std::vector<std::string>{"t", "id", "M", "M_bar", "P", "c", "C_global"});
  CHECK(std::stod(rows[1][2]) == comp[0].m);
  CHECK(std::stod(rows[1][3]) == comp[0].m_bar);
  CHECK(std::stod(rows[1][5]) == comp[0].c);

  const std::vector<ReferenceRow> refs = {{0.15, 3, 101.01010101010101, 26.0, 0.1}};
  const fs::path rpath = dir / "references.csv";
  write_references_csv(rpath.string(), refs);
  rows = read_csv(rpath);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0] == std::vector<std::string>{"t", "id", "x_ref", "v_ref", "u_ref"});
  CHECK(std::stod(rows[1][2]) == refs[0].x_ref);
  CHECK(std::stod(rows[1][4]) == refs[0].u_ref);
}

TEST_CASE("sweep csv marks infeasible entries as Inf") {
  const fs::path dir = fresh_dir("sweep");
  std::vector<SweepRow> rows(3);
  rows[0] = {0.0, true, std::nullopt, std::nullopt};
  rows[1] = {0.5, true, 4.5, 18.761706741007664};
  rows[2] = {0.5, false, 5.25, 27.5};
  const fs::path path = dir / "sweep.csv";
  write_sweep_csv(path.string(), rows);

  const auto parsed = read_csv(path);
  REQUIRE(parsed.size() == 4);
  CHECK(parsed[0] ==
        std::vector<std::string>{"q", "mode", "maneuver_time", "energy"});
  CHECK(parsed[1] == std::vector<std::string>{"0", "control", "Inf", "Inf"});
  CHECK(parsed[2][1] == "control");
  CHECK(std::stod(parsed[2][2]) == 4.5);
  CHECK(std::stod(parsed[2][3]) == 18.761706741007664);
  CHECK(parsed[3][1] == "none");
}

TEST_CASE("metrics report mirrors the run outcome") {
  ManeuverResult ok;
  ok.feasible = true;
  ok.t_lateral = 3.75;
  ok.t_final = 4.5;
  ok.maneuver_time = 4.5;
  ok.triplet_energy = 27.361666;
  ok.pair_lead_id = 3;
  ok.pair_rear_id = 4;
  ok.disruption = {{1, 0.25}, {6, 0.0}};

  const Json m = metrics_json(ok);
  CHECK(m.at("feasible") == true);
  CHECK_FALSE(m.contains("reason"));
  CHECK(m.at("maneuver_time") == 4.5);
  CHECK(m.at("triplet_energy") == 27.361666);
  CHECK(m.at("t_lateral") == 3.75);
  CHECK(m.at("t_final") == 4.5);
  CHECK(m.at("pair").at("lead") == 3);
  CHECK(m.at("pair").at("rear") == 4);
  CHECK(m.at("disruption").at("1") == 0.25);
  CHECK(m.at("disruption").at("6") == 0.0);

  ManeuverResult bad;
  bad.feasible = false;
  bad.reason = "no feasible merge slot";
  const Json b = metrics_json(bad);
  CHECK(b.at("feasible") == false);
  CHECK(b.at("reason") == "no feasible merge slot");
  CHECK(b.at("maneuver_time") == "Inf");
  CHECK(b.at("triplet_energy") == "Inf");
  CHECK(b.at("t_lateral") == "Inf");
  CHECK(b.at("t_final") == "Inf");
  CHECK(b.at("pair").at("lead").is_null());
  CHECK(b.at("pair").at("rear").is_null());
}

TEST_CASE("trace writer emits the standard file set") {
  const fs::path dir = fresh_dir("traces");
  ManeuverResult r;
  r.feasible = true;
  r.maneuver_time = 1.0;
  r.states = {{0.0, 6, 0.0, 0.0, 0.0, 20.0, 0.5}};
  r.compliance = {{0.25, 1, 1.0, 1.0, 0.5, 0.0, 0.0}};
  r.references = {{0.0, 6, 0.0, 20.0, 0.5}};

  const RunReport rep = write_traces(r, (dir / "out").string());
  REQUIRE(rep.trace_paths.size() == 4);
  for (const std::string& p : rep.trace_paths) CHECK(fs::exists(p));
  CHECK(fs::path(rep.trace_paths[0]).filename() == "positions.csv");
  CHECK(fs::path(rep.trace_paths[1]).filename() == "compliance.csv");
  CHECK(fs::path(rep.trace_paths[2]).filename() == "references.csv");
  CHECK(fs::path(rep.trace_paths[3]).filename() == "metrics.json");

  std::ifstream in(rep.trace_paths[3]);
  Json metrics;
  in >> metrics;
  CHECK(metrics == rep.metrics);
}

TEST_CASE("command line front end reports the documented exit codes") {
  const fs::path dir = fresh_dir("cli");
  const std::string shipped =
      std::string(CCC_SCENARIO_DIR) + "/paper_default.json";

  SECTION("validate and a feasible run exit 0") {
    CHECK(run_cli("validate --scenario \"" + shipped + "\"") == 0);

    const fs::path out = dir / "run_ok";
    CHECK(run_cli("run --scenario \"" + shipped + "\" --out " + quoted(out)) == 0);
    CHECK(fs::exists(out / "positions.csv"));
    CHECK(fs::exists(out / "compliance.csv"));
    CHECK(fs::exists(out / "references.csv"));
    CHECK(fs::exists(out / "metrics.json"));

    std::ifstream in(out / "metrics.json");
    Json m;
    in >> m;
    CHECK(m.at("feasible") == true);
    CHECK(m.at("pair").at("lead") == 3);
    CHECK(m.at("pair").at("rear") == 4);
  }

  SECTION("an infeasible maneuver exits 1") {
    // rearmost vehicle fully uncommitted and the controller switched off
    ScenarioFile f = default_file();
    REQUIRE_FALSE(f.scenario.fast_lane.empty());
    f.scenario.fast_lane.back().q = 0.0;
    f.sim.controller_mode = ControllerMode::None;
    const fs::path fixture = dir / "stubborn.json";
    save_scenario(fixture.string(), f.scenario, f.sim);

    const fs::path out = dir / "run_bad";
    CHECK(run_cli("run --scenario " + quoted(fixture) + " --out " + quoted(out)) == 1);
    std::ifstream in(out / "metrics.json");
    Json m;
    in >> m;
    CHECK(m.at("feasible") == false);
    CHECK(m.at("maneuver_time") == "Inf");
    CHECK(m.at("reason").get<std::string>() != "");
  }

  SECTION("bad invocations and bad input exit 2") {
    CHECK(run_cli("") == 2);                    // missing subcommand
    CHECK(run_cli("frobnicate") == 2);          // unknown subcommand
    CHECK(run_cli("run") == 2);                 // missing required --scenario
    CHECK(run_cli("run --scenario \"" + shipped + "\" --bogus 1") == 2);
    CHECK(run_cli("run --scenario " + quoted(dir / "missing.json")) == 2);

    Json doc;
    {
      const ScenarioFile f = default_file();
      doc = to_json(f.scenario, f.sim);
    }
    doc["road"]["banking"] = 0.2;  // unknown field
    const fs::path bad = dir / "unknown_field.json";
    std::ofstream(bad) << doc.dump(2) << "\n";
    CHECK(run_cli("validate --scenario " + quoted(bad)) == 2);
    CHECK(run_cli("run --scenario " + quoted(bad)) == 2);

    std::ofstream(dir / "garbage.json") << "{ not json";
    CHECK(run_cli("validate --scenario " + quoted(dir / "garbage.json")) == 2);
  }
}
