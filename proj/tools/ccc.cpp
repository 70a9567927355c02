// Command-line front end: run one maneuver, sweep initial compliance levels,
// compare controller configurations, or just validate a scenario file.
// Exit codes: 0 success, 1 infeasible maneuver, 2 invalid input, 3 internal.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccc/io.hpp"
#include "ccc/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitInternal = 3;

int cmd_run(const std::string& scenario_path, const std::string& mode,
            const std::string& out_dir) {
  ccc::ScenarioFile sf = ccc::load_scenario(scenario_path);
  if (!mode.empty())
    sf.sim.controller_mode = ccc::controller_mode_from(mode, "--mode");
  const ccc::ManeuverResult r = ccc::run_maneuver(sf.scenario, sf.sim);
  const ccc::RunReport rep = ccc::write_traces(r, out_dir);
  std::cout << rep.metrics.dump(2) << "\n";
  for (const std::string& p : rep.trace_paths) std::cout << "wrote " << p << "\n";
  return r.feasible ? kExitOk : kExitInfeasible;
}

int cmd_sweep(const std::string& scenario_path, std::vector<double> levels,
              std::optional<int> vehicle, const std::string& out_dir) {
  const ccc::ScenarioFile sf = ccc::load_scenario(scenario_path);
  const std::vector<ccc::SweepRow> rows =
      ccc::sweep_initial_compliance(sf.scenario, std::move(levels), sf.sim, vehicle);
  std::filesystem::create_directories(out_dir);
  const std::string path =
      (std::filesystem::path(out_dir) / "sweep.csv").string();
  ccc::write_sweep_csv(path, rows);
  for (const ccc::SweepRow& r : rows)
    std::cout << ccc::g17(r.q) << ',' << (r.control_on ? "control" : "none") << ','
              << (r.maneuver_time ? ccc::g17(*r.maneuver_time) : "Inf") << ','
              << (r.energy ? ccc::g17(*r.energy) : "Inf") << "\n";
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_ablate(const std::string& scenario_path, const std::string& out_dir) {
  const ccc::ScenarioFile sf = ccc::load_scenario(scenario_path);
  const ccc::AblationResult ab = ccc::ablation_run(sf.scenario, sf.sim);
  std::filesystem::create_directories(out_dir);
  const auto emit = [&](const char* name, const ccc::ManeuverResult& r) {
    const std::string path =
        (std::filesystem::path(out_dir) / (std::string("compliance_") + name + ".csv"))
            .string();
    ccc::write_compliance_csv(path, r.compliance);
    std::cout << "wrote " << path << (r.feasible ? "" : " (run infeasible)") << "\n";
  };
  emit("both", ab.both);
  emit("local", ab.local_only);
  emit("global", ab.global_only);
  return kExitOk;
}

int cmd_validate(const std::string& scenario_path) {
  const ccc::ScenarioFile sf = ccc::load_scenario(scenario_path);
  std::cout << "scenario ok: " << sf.scenario.fast_lane.size()
            << " fast-lane vehicles, merger id " << sf.scenario.merger.id
            << ", obstacle id " << sf.scenario.obstacle.id << "\n";
  if (sf.applied_defaults.empty()) {
    std::cout << "no defaults applied\n";
  } else {
    std::cout << "applied defaults:\n";
    for (const std::string& d : sf.applied_defaults) std::cout << "  " << d << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative lane-change maneuver simulator"};
  app.require_subcommand(1);

  std::string scenario_path, mode, out_dir = "out";
  std::vector<double> levels{0.0, 0.2, 0.5, 0.8};
  int vehicle = -1;

  CLI::App* run = app.add_subcommand("run", "simulate one maneuver");
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--mode", mode, "controller override: both|global|local|none");
  run->add_option("--out", out_dir, "output directory");

  CLI::App* sweep =
      app.add_subcommand("sweep", "vary one vehicle's initial commitment");
  sweep->add_option("--scenario", scenario_path, "scenario file")->required();
  sweep->add_option("--levels", levels, "commitment levels")->delimiter(',');
  sweep->add_option("--vehicle", vehicle, "fast-lane vehicle id (default: rearmost hdv)");
  sweep->add_option("--out", out_dir, "output directory");

  CLI::App* ablate =
      app.add_subcommand("ablate", "compare controller configurations");
  ablate->add_option("--scenario", scenario_path, "scenario file")->required();
  ablate->add_option("--out", out_dir, "output directory");

  CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("--scenario", scenario_path, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (run->parsed()) return cmd_run(scenario_path, mode, out_dir);
    if (sweep->parsed())
      return cmd_sweep(scenario_path, levels,
                       vehicle >= 0 ? std::optional<int>(vehicle) : std::nullopt,
                       out_dir);
    if (ablate->parsed()) return cmd_ablate(scenario_path, out_dir);
    if (validate->parsed()) return cmd_validate(scenario_path);
  } catch (const ccc::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInvalidInput;
}
