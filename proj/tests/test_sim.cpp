#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "cavsim/metrics.hpp"
#include "cavsim/sim.hpp"

using namespace cavsim;

namespace {

ScenarioConfig test_config(ScenarioKind scenario, DemandLevel demand,
                           unsigned long seed, double duration = 360.0) {
  ScenarioConfig cfg = default_config();
  cfg.scenario = scenario;
  cfg.demand = demand;
  cfg.seed = seed;
  cfg.duration = duration;
  cfg.warmup = 60.0;
  cfg.log_trajectories = true;
  // Coarse table grids keep per-test table builds cheap.
  cfg.powertrain.table_grids = {1250.0, 1500.0, 30.0, 0.25};
  return cfg;
}

}  // namespace

TEST_CASE("zero-arrival config produces an empty, error-free report") {
  ScenarioConfig cfg = test_config(ScenarioKind::baseline, DemandLevel::light, 1);
  cfg.rates = {0.0, 0.0, 0.0};
  cfg.pt_policy = PtPolicyKind::baseline;
  const RunOutputs out = run_scenario(cfg);
  CHECK(out.report.spawned == 0);
  CHECK(out.report.completed == 0);
  CHECK(out.report.vehicles.empty());
  CHECK(out.report.fleet.counted == 0);
  CHECK(out.trajectories.empty());
}

TEST_CASE("emit_outputs writes headers-only files for an empty run") {
  ScenarioConfig cfg = test_config(ScenarioKind::baseline, DemandLevel::light, 1);
  cfg.rates = {0.0, 0.0, 0.0};
  cfg.pt_policy = PtPolicyKind::baseline;
  const RunOutputs out = run_scenario(cfg);
  const std::string dir = "test_outputs_empty";
  emit_outputs(out, dir);
  for (const char* name : {"trajectories.csv", "speed_profile.csv",
                           "schedule.csv", "summary.json"}) {
    std::ifstream f(dir + "/" + name);
    REQUIRE_MESSAGE(f.good(), name);
    std::string first;
    std::getline(f, first);
    CHECK_FALSE(first.empty());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("fixed seeds reproduce byte-identical summaries") {
  const ScenarioConfig cfg =
      test_config(ScenarioKind::corridor, DemandLevel::medium, 7, 240.0);
  const RunOutputs a = run_scenario(cfg);
  const RunOutputs b = run_scenario(cfg);
  CHECK(a.report.to_json().dump(2) == b.report.to_json().dump(2));
  CHECK(a.schedule_csv == b.schedule_csv);

  ScenarioConfig other = cfg;
  other.seed = 8;
  const RunOutputs c = run_scenario(other);
  CHECK(a.report.to_json().dump(2) != c.report.to_json().dump(2));
}

TEST_CASE("summary JSON round-trips losslessly") {
  const ScenarioConfig cfg =
      test_config(ScenarioKind::isolated, DemandLevel::light, 3, 240.0);
  const RunOutputs out = run_scenario(cfg);
  const auto j = out.report.to_json();
  const MetricsReport back = report_from_json(j);
  CHECK(back.to_json() == j);
}

TEST_CASE("position bookkeeping closes to the integrator tolerance") {
  for (ScenarioKind s : {ScenarioKind::baseline, ScenarioKind::corridor}) {
    ScenarioConfig cfg = test_config(s, DemandLevel::medium, 11, 300.0);
    cfg.pt_policy = PtPolicyKind::baseline;
    const RunOutputs out = run_scenario(cfg);
    CHECK(out.report.max_conservation_error_m <
          1e-6 * cfg.corridor.total_length);
  }
}

TEST_CASE("fleet aggregates equal a recomputation from the vehicle rows") {
  const ScenarioConfig cfg =
      test_config(ScenarioKind::baseline, DemandLevel::medium, 5, 300.0);
  const RunOutputs out = run_scenario(cfg);
  REQUIRE(out.report.fleet.counted > 0);
  const FleetAggregate re = aggregate_fleet(out.report.vehicles);
  CHECK(re.counted == out.report.fleet.counted);
  CHECK(re.mean_travel_time ==
        doctest::Approx(out.report.fleet.mean_travel_time));
  CHECK(re.stop_events == out.report.fleet.stop_events);
  CHECK(re.pt_baseline.fuel_g_per_km_mean ==
        doctest::Approx(out.report.fleet.pt_baseline.fuel_g_per_km_mean));
  CHECK(re.pt_optimal.eff_std ==
        doctest::Approx(out.report.fleet.pt_optimal.eff_std));
}

TEST_CASE("trajectory log rows match each vehicle's residency window") {
  const ScenarioConfig cfg =
      test_config(ScenarioKind::corridor, DemandLevel::light, 13, 300.0);
  const RunOutputs out = run_scenario(cfg);
  std::map<VehicleId, int> rows;
  for (const auto& r : out.trajectories) rows[r.id]++;
  int checked = 0;
  for (const auto& v : out.report.vehicles) {
    REQUIRE(rows.count(v.id));
    const double logged = rows[v.id] * cfg.dt;
    CHECK(logged == doctest::Approx(v.travel_time).epsilon(0.02));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("corridor scenario: smooth, on-schedule, and stop-free") {
  const ScenarioConfig cfg =
      test_config(ScenarioKind::corridor, DemandLevel::medium, 2, 300.0);
  const RunOutputs out = run_scenario(cfg);
  REQUIRE(out.report.fleet.counted > 0);
  CHECK(out.report.fleet.stop_events == 0);
  CHECK(out.report.safety.cav_gap_violations == 0);
  CHECK(out.report.safety.guard_activations == 0);
  CHECK(out.report.safety.held_vehicles == 0);
  // Realized zone entries match the schedule within one step.
  CHECK(out.report.safety.max_schedule_deviation <= cfg.dt + 1e-9);
}

TEST_CASE("isolated scenario: no stop events inside control zones") {
  const ScenarioConfig cfg =
      test_config(ScenarioKind::isolated, DemandLevel::medium, 2, 300.0);
  const RunOutputs out = run_scenario(cfg);
  REQUIRE(out.report.fleet.counted > 0);
  CHECK(out.report.fleet.stop_events_in_control_zones == 0);
  CHECK(out.report.safety.cav_gap_violations == 0);
}

TEST_CASE("baseline scenario: heavy demand produces stop-and-go and stays collision-free") {
  ScenarioConfig cfg =
      test_config(ScenarioKind::baseline, DemandLevel::heavy, 4, 420.0);
  cfg.pt_policy = PtPolicyKind::baseline;
  const RunOutputs out = run_scenario(cfg);
  REQUIRE(out.report.fleet.counted > 0);
  CHECK(out.report.fleet.stop_events > 0);
  // The audit aborts on contact; a completed run certifies s > 0 throughout.
  CHECK(out.report.safety.baseline_undershoots >= 0);
}

TEST_CASE("baseline SRZ compliance at equilibrium depth") {
  ScenarioConfig cfg =
      test_config(ScenarioKind::baseline, DemandLevel::light, 6, 360.0);
  cfg.pt_policy = PtPolicyKind::baseline;
  const RunOutputs out = run_scenario(cfg);
  int checked = 0;
  for (const auto& v : out.report.vehicles) {
    if (!v.counted) continue;
    CHECK(v.srz_speed_max <= 8.5);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("compare_runs: identical runs report zero improvement") {
  const ScenarioConfig cfg =
      test_config(ScenarioKind::baseline, DemandLevel::light, 9, 240.0);
  const RunOutputs a = run_scenario(cfg);
  const RunOutputs b = run_scenario(cfg);
  const Improvement imp = compare_runs(a.report, PtVariant::baseline, b.report,
                                       PtVariant::baseline);
  CHECK(imp.fuel_g_per_km_improvement_pct == doctest::Approx(0.0));
  CHECK(imp.eff_mean_treat == doctest::Approx(imp.eff_mean_base));
}

TEST_CASE("compare_runs refuses mismatched configurations") {
  const RunOutputs a = run_scenario(
      test_config(ScenarioKind::baseline, DemandLevel::light, 9, 240.0));
  const RunOutputs b = run_scenario(
      test_config(ScenarioKind::corridor, DemandLevel::medium, 9, 240.0));
  CHECK_THROWS_AS(static_cast<void>(compare_runs(a.report, PtVariant::baseline,
                                                 b.report, PtVariant::optimal)),
                  std::invalid_argument);
}

TEST_CASE("battery capacity clamp forces the engine once depleted") {
  ScenarioConfig cfg =
      test_config(ScenarioKind::baseline, DemandLevel::light, 10, 300.0);
  cfg.powertrain.battery_capacity_wh = 1.0;  // nearly no usable charge
  const RunOutputs out = run_scenario(cfg);
  REQUIRE(out.report.fleet.counted > 0);
  // With the clamp the optimal-policy fleet must burn fuel.
  CHECK(out.report.fleet.pt_optimal.fuel_g_per_km_mean > 0.0);
}

TEST_CASE("config JSON round-trip preserves every field") {
  ScenarioConfig cfg = default_config();
  cfg.scenario = ScenarioKind::isolated;
  cfg.demand = DemandLevel::heavy;
  cfg.seed = 42;
  cfg.signal = SignalConfig{3, {20.0, 40.0, 5.0}};
  cfg.powertrain.battery_capacity_wh = 1234.5;
  const auto j = to_json(cfg);
  const ScenarioConfig back = config_from_json(j);
  CHECK(to_json(back) == j);
}
