#include <catch2/catch_amalgamated.hpp>
#include <ccc/compliance.hpp>

#include <cmath>
#include <vector>

using namespace ccc;

namespace {

ComplianceConfig config(double alpha = 0.1, double beta = 0.1, double gamma = 0.7,
                        double e_max = 5.0) {
  ComplianceConfig cfg;
  cfg.q_star = 1.0;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.gamma = gamma;
  cfg.w_q = 1.0;
  cfg.w_c = 0.5;
  cfg.w_i = 0.5;
  cfg.e_max = e_max;
  return cfg;
}

}  // namespace

TEST_CASE("unit clamp branch table") {
  CHECK(clamp_unit(1.5) == 1.0);
  CHECK(clamp_unit(0.3) == 0.3);
  CHECK(clamp_unit(-0.2) == 0.0);
  CHECK(clamp_unit(0.0) == 0.0);
  CHECK(clamp_unit(1.0) == 1.0);
}

TEST_CASE("unit clamp is idempotent and monotone") {
  const std::vector<double> xs{-3.0, -0.2, 0.0, 0.1, 0.5, 0.99, 1.0, 1.5, 7.0};
  for (double x : xs) CHECK(clamp_unit(clamp_unit(x)) == clamp_unit(x));
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    CHECK(clamp_unit(xs[i]) <= clamp_unit(xs[i + 1]));
}

TEST_CASE("state error is the (x, v) Euclidean norm") {
  VehicleState a{10.0, 4.0, 0.0, 20.0};
  CHECK(measure_error(a, a) == 0.0);

  VehicleState b = a;
  b.x += 3.0;
  b.v += 4.0;
  CHECK(measure_error(a, b) == Catch::Approx(5.0).margin(1e-12));

  VehicleState c = a;
  c.v += 2.0;
  CHECK(measure_error(a, c) == Catch::Approx(2.0).margin(1e-12));

  // lateral pose does not enter the longitudinal error
  VehicleState d = a;
  d.y += 1.0;
  d.theta += 0.1;
  CHECK(measure_error(a, d) == 0.0);
}

TEST_CASE("instantaneous compliance, proportional mode") {
  const ComplianceConfig cfg = config();
  CHECK(instantaneous_compliance(0.0, cfg) == 1.0);
  CHECK(instantaneous_compliance(5.0, cfg) == 0.0);
  CHECK(instantaneous_compliance(2.5, cfg) == Catch::Approx(0.5).margin(1e-12));
  CHECK(instantaneous_compliance(80.0, cfg) == 0.0);  // floored, never negative
}

TEST_CASE("instantaneous compliance, threshold mode") {
  ComplianceConfig cfg = config();
  cfg.measurement = MeasurementMode::Macroscopic;
  CHECK(instantaneous_compliance(4.99, cfg) == 1.0);
  CHECK(instantaneous_compliance(5.0, cfg) == 1.0);
  CHECK(instantaneous_compliance(5.01, cfg) == 0.0);
}

TEST_CASE("global cost update, one-step hand values") {
  ComplianceConfig cfg = config();
  CHECK(update_global(0.0, 1.0, cfg) == 0.0);
  CHECK(update_global(0.1, 0.8, cfg) == Catch::Approx(0.12).margin(1e-12));
  CHECK(update_global(0.05, 1.0, cfg) == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("global cost never goes negative") {
  ComplianceConfig cfg = config();
  cfg.q_star = 0.5;  // over-compliant population would push C down
  CHECK(update_global(0.01, 1.0, cfg) == 0.0);
}

TEST_CASE("local cost update, one-step hand values") {
  const ComplianceConfig cfg = config();
  AgentComplianceState a = make_agent(0.5, false, cfg);

  a.c = 0.0;
  a.m_bar = 1.0;
  CHECK(update_local(a, cfg) == 0.0);

  a.m_bar = 0.0;
  CHECK(update_local(a, cfg) == Catch::Approx(0.1).margin(1e-12));

  a.c = 0.1;
  a.m_bar = 0.5;
  CHECK(update_local(a, cfg) == Catch::Approx(0.15).margin(1e-12));
}

TEST_CASE("windowed average recursion and closed form") {
  SECTION("two perfect measurements from an unproven start") {
    double m_bar = 0.0;
    m_bar = update_windowed_average(m_bar, 1.0, 0.7);
    m_bar = update_windowed_average(m_bar, 1.0, 0.7);
    CHECK(m_bar == Catch::Approx(0.51).margin(1e-12));  // 1 - 0.7^2
  }
  SECTION("constant input m gives (1 - gamma^k) m for k <= 50") {
    for (double m : {1.0, 0.6}) {
      double m_bar = 0.0;
      for (int k = 1; k <= 50; ++k) {
        m_bar = update_windowed_average(m_bar, m, 0.7);
        CHECK(m_bar == Catch::Approx((1.0 - std::pow(0.7, k)) * m).margin(1e-12));
      }
    }
  }
  SECTION("fixed point") {
    CHECK(update_windowed_average(0.37, 0.37, 0.7) ==
          Catch::Approx(0.37).margin(1e-15));
  }
  SECTION("stays in [0,1] for any input sequence") {
    double m_bar = 0.0;
    const std::vector<double> ms{1.0, 0.0, 0.2, 1.0, 0.9, 0.0, 0.0, 1.0};
    for (double m : ms) {
      m_bar = update_windowed_average(m_bar, m, 0.7);
      CHECK(m_bar >= 0.0);
      CHECK(m_bar <= 1.0);
    }
  }
}

TEST_CASE("compliance probability is the clamped weighted sum") {
  const ComplianceConfig cfg = config();
  AgentComplianceState a = make_agent(0.3, false, cfg);
  a.c = 0.12;
  CHECK(compliance_probability(a, 0.04, cfg) == Catch::Approx(0.38).margin(1e-12));

  AgentComplianceState full = make_agent(1.0, false, cfg);
  full.c = 0.0;
  CHECK(compliance_probability(full, 0.0, cfg) == 1.0);

  AgentComplianceState zero = make_agent(0.0, false, cfg);
  zero.c = 0.0;
  CHECK(compliance_probability(zero, 0.0, cfg) == 0.0);

  // controllable agents ignore the sum entirely
  AgentComplianceState cav = make_agent(0.2, true, cfg);
  cav.c = 0.0;
  CHECK(compliance_probability(cav, 0.0, cfg) == 1.0);
}

TEST_CASE("probability is monotone in proclivity and both costs") {
  const ComplianceConfig cfg = config();
  AgentComplianceState a = make_agent(0.2, false, cfg);
  a.c = 0.1;
  const double base = compliance_probability(a, 0.1, cfg);

  AgentComplianceState more_q = a;
  more_q.q = 0.4;
  CHECK(compliance_probability(more_q, 0.1, cfg) >= base);

  AgentComplianceState more_c = a;
  more_c.c = 0.3;
  CHECK(compliance_probability(more_c, 0.1, cfg) >= base);

  CHECK(compliance_probability(a, 0.5, cfg) >= base);
}

TEST_CASE("stepping a fully controllable population changes nothing") {
  const ComplianceConfig cfg = config();
  std::vector<AgentComplianceState> agents{make_agent(1.0, true, cfg),
                                           make_agent(1.0, true, cfg),
                                           make_agent(1.0, true, cfg)};
  double g = 0.0;
  for (int k = 0; k < 20; ++k) {
    ComplianceStep st = step_all(agents, g, {0.0, 3.0, 11.0}, cfg,
                                 ControllerMode::Both);
    agents = st.agents;
    g = st.global_cost;
  }
  CHECK(g == 0.0);
  for (const auto& a : agents) {
    CHECK(a.p == 1.0);
    CHECK(a.c == 0.0);
  }
}

TEST_CASE("one full step matches a hand computation") {
  // One human agent (q=0, unproven error), one controllable agent. Order of a
  // step: instantaneous measurement -> window -> global (instantaneous M) ->
  // local (fresh window) -> probability from the updated costs.
  const ComplianceConfig cfg = config();
  std::vector<AgentComplianceState> agents{make_agent(0.0, false, cfg),
                                           make_agent(1.0, true, cfg)};
  const ComplianceStep st = step_all(agents, 0.0, {10.0, 0.0}, cfg,
                                     ControllerMode::Both);
  const AgentComplianceState& h = st.agents[0];
  CHECK(h.m == 0.0);                                         // e >= e_max
  CHECK(h.m_bar == Catch::Approx(0.7).margin(1e-12));        // 0.7*1 + 0.3*0
  CHECK(st.global_cost == Catch::Approx(0.05).margin(1e-12));  // 0.1*(1-0.5)
  CHECK(h.c == Catch::Approx(0.03).margin(1e-12));           // 0.1*(1-0.7)
  CHECK(h.p == Catch::Approx(0.04).margin(1e-12));           // 0.5*C' + 0.5*c'
}

TEST_CASE("persistent deviation drives probability up to the clamp") {
  const ComplianceConfig cfg = config();
  std::vector<AgentComplianceState> agents{make_agent(0.0, false, cfg)};
  double g = 0.0;
  double prev_p = agents[0].p;
  bool clamped = false;
  for (int k = 0; k < 80; ++k) {
    ComplianceStep st = step_all(agents, g, {10.0}, cfg, ControllerMode::Both);
    agents = st.agents;
    g = st.global_cost;
    if (!clamped) CHECK(agents[0].p >= prev_p);
    prev_p = agents[0].p;
    if (agents[0].p == 1.0) clamped = true;
  }
  CHECK(clamped);
}

TEST_CASE("shared cost grows while a compliant agent pays nothing locally") {
  const ComplianceConfig cfg = config();
  std::vector<AgentComplianceState> agents{make_agent(0.5, false, cfg),
                                           make_agent(0.5, false, cfg)};
  double g = 0.0;
  for (int k = 0; k < 10; ++k) {
    ComplianceStep st = step_all(agents, g, {0.0, 10.0}, cfg,
                                 ControllerMode::Both);
    agents = st.agents;
    g = st.global_cost;
  }
  CHECK(agents[0].c == 0.0);   // never deviated
  CHECK(agents[1].c > 0.0);
  CHECK(g > 0.0);              // everyone shares the population penalty
  CHECK(agents[1].p > agents[0].p);
}

TEST_CASE("controller mode gates which costs accrue") {
  const ComplianceConfig cfg = config();
  const std::vector<AgentComplianceState> start{make_agent(0.0, false, cfg)};

  ComplianceStep local = step_all(start, 0.0, {10.0}, cfg, ControllerMode::LocalOnly);
  CHECK(local.global_cost == 0.0);
  CHECK(local.agents[0].c > 0.0);

  ComplianceStep global = step_all(start, 0.0, {10.0}, cfg, ControllerMode::GlobalOnly);
  CHECK(global.global_cost > 0.0);
  CHECK(global.agents[0].c == 0.0);
}
