#pragma once

// Compliance bookkeeping for fast-lane agents: a shared (global) cost driven by
// the population mean of instantaneous compliance, a per-agent (local) cost
// driven by a fading-memory average, and the resulting probability that an
// agent follows its reference instead of acting selfishly.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ccc/scenario.hpp"

namespace ccc {

enum class MeasurementMode { Microscopic, Macroscopic };
enum class ControllerMode { Both, GlobalOnly, LocalOnly, None };

struct ComplianceConfig {
  double q_star = 1.0;  // population compliance target in [0,1]
  double alpha = 0.1;   // global-cost gain
  double beta = 0.1;    // local-cost gain
  double gamma = 0.7;   // fading-memory factor in [0,1)
  double w_q = 1.0;     // weight on the agent's own proclivity
  double w_c = 0.5;     // weight on the shared cost
  double w_i = 0.5;     // weight on the agent's local cost
  double e_max = 5.0;   // deviation at (or beyond) which compliance reads 0
  MeasurementMode measurement = MeasurementMode::Microscopic;

  void validate() const {
    if (q_star < 0.0 || q_star > 1.0)
      throw ValidationError("compliance.q_star", "must be in [0, 1]");
    if (alpha < 0.0) throw ValidationError("compliance.alpha", "must be >= 0");
    if (beta < 0.0) throw ValidationError("compliance.beta", "must be >= 0");
    if (gamma < 0.0 || gamma >= 1.0)
      throw ValidationError("compliance.gamma", "must be in [0, 1)");
    if (e_max <= 0.0) throw ValidationError("compliance.e_max", "must be > 0");
    if (w_q < 0.0 || w_c < 0.0 || w_i < 0.0)
      throw ValidationError("compliance.weights", "must be >= 0");
  }
};

struct AgentComplianceState {
  double q = 1.0;            // initial proclivity
  bool controllable = true;  // CAVs: probability pinned to 1, costs never accrue
  double m = 1.0;            // last instantaneous compliance measurement
  double m_bar = 1.0;        // fading-memory average (compliant until shown otherwise)
  double c = 0.0;            // local cost
  double p = 1.0;            // current compliance probability
};

// Piecewise-linear saturation onto [0, 1].
inline double clamp_unit(double x) { return x > 1.0 ? 1.0 : (x < 0.0 ? 0.0 : x); }

// Deviation between an agent's actual and reference motion, position and speed only.
inline double measure_error(const VehicleState& actual, const VehicleState& ref) {
  return std::hypot(actual.x - ref.x, actual.v - ref.v);
}

// Instantaneous compliance from a deviation measurement.
inline double instantaneous_compliance(double e, const ComplianceConfig& cfg) {
  if (cfg.e_max <= 0.0)
    throw std::invalid_argument("instantaneous_compliance: e_max must be > 0");
  if (cfg.measurement == MeasurementMode::Macroscopic)
    return e <= cfg.e_max ? 1.0 : 0.0;
  return std::max(1.0 - e / cfg.e_max, 0.0);
}

// Fading-memory average: new measurements enter with weight 1-gamma.
inline double update_windowed_average(double m_bar_prev, double m_k, double gamma) {
  return gamma * m_bar_prev + (1.0 - gamma) * m_k;
}

// Shared cost feedback on the population mean shortfall, floored at zero.
inline double update_global(double g, double mean_m, const ComplianceConfig& cfg) {
  return std::max(0.0, g + cfg.alpha * (cfg.q_star - mean_m));
}

// Per-agent cost feedback on the windowed shortfall, floored at zero.
inline double update_local(const AgentComplianceState& a, const ComplianceConfig& cfg) {
  return std::max(0.0, a.c + cfg.beta * (cfg.q_star - a.m_bar));
}

inline double compliance_probability(const AgentComplianceState& a, double g,
                                     const ComplianceConfig& cfg) {
  if (a.controllable) return 1.0;
  return clamp_unit(cfg.w_q * a.q + cfg.w_c * g + cfg.w_i * a.c);
}

inline AgentComplianceState make_agent(double q, bool controllable,
                                       const ComplianceConfig& cfg) {
  AgentComplianceState a;
  a.q = q;
  a.controllable = controllable;
  a.p = controllable ? 1.0 : clamp_unit(cfg.w_q * q);
  return a;
}

struct ComplianceStep {
  std::vector<AgentComplianceState> agents;
  double global_cost = 0.0;
};

// One synchronous controller step from per-agent deviation measurements.
// Controllable agents are counted as fully compliant in the population mean.
// In single-controller modes the disabled cost stays frozen (at zero when it
// has never been updated).
inline ComplianceStep step_all(std::vector<AgentComplianceState> agents,
                               double global_cost,
                               const std::vector<double>& errors,
                               const ComplianceConfig& cfg,
                               ControllerMode mode = ControllerMode::Both) {
  if (errors.size() != agents.size())
    throw std::invalid_argument("step_all: one error per agent required");
  cfg.validate();

  double mean_m = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    AgentComplianceState& a = agents[i];
    a.m = a.controllable ? 1.0 : instantaneous_compliance(errors[i], cfg);
    a.m_bar = update_windowed_average(a.m_bar, a.m, cfg.gamma);
    mean_m += a.m;
  }
  if (!agents.empty()) mean_m /= static_cast<double>(agents.size());

  const bool use_global = mode == ControllerMode::Both || mode == ControllerMode::GlobalOnly;
  const bool use_local = mode == ControllerMode::Both || mode == ControllerMode::LocalOnly;
  if (use_global && !agents.empty())
    global_cost = update_global(global_cost, mean_m, cfg);

  for (AgentComplianceState& a : agents) {
    if (use_local && !a.controllable) a.c = update_local(a, cfg);
    a.p = compliance_probability(a, global_cost, cfg);
  }
  return ComplianceStep{std::move(agents), global_cost};
}

}  // namespace ccc
