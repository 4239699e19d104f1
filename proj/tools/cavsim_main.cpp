// cavsim command line: run scenarios, sweep the scenario/demand matrix,
// build the torque-split table, and run the oracle verification suites.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavsim/config.hpp"
#include "cavsim/metrics.hpp"
#include "cavsim/sim.hpp"
#include "oracles/suites.hpp"

namespace {

using namespace cavsim;

ScenarioConfig base_config(const std::string& config_path) {
  if (config_path.empty()) return default_config();
  return load_config_file(config_path);
}

int cmd_run(const std::string& config_path, const std::string& scenario,
            const std::string& demand, unsigned long seed,
            const std::string& pt, double duration, const std::string& out_dir) {
  ScenarioConfig cfg = base_config(config_path);
  if (!scenario.empty()) cfg.scenario = scenario_from_string(scenario);
  if (!demand.empty()) cfg.demand = demand_from_string(demand);
  if (!pt.empty()) cfg.pt_policy = pt_policy_from_string(pt);
  if (seed != 0) cfg.seed = seed;
  if (duration > 0.0) cfg.duration = duration;
  cfg.validate();

  RunOutputs out = run_scenario(cfg);
  const auto& f = out.report.fleet;
  std::printf("scenario=%s demand=%s seed=%lu\n", to_string(cfg.scenario).c_str(),
              to_string(cfg.demand).c_str(), cfg.seed);
  std::printf("  vehicles counted: %d (spawned %d, completed %d)\n", f.counted,
              out.report.spawned, out.report.completed);
  std::printf("  mean travel time: %.2f s, stop events: %d (in control zones: %d)\n",
              f.mean_travel_time, f.stop_events, f.stop_events_in_control_zones);
  std::printf("  basePT fuel: %.3f g/km  optPT fuel: %.3f g/km\n",
              f.pt_baseline.fuel_g_per_km_mean, f.pt_optimal.fuel_g_per_km_mean);
  std::printf("  basePT eff: %.4f +- %.4f  optPT eff: %.4f +- %.4f\n",
              f.pt_baseline.eff_mean, f.pt_baseline.eff_std,
              f.pt_optimal.eff_mean, f.pt_optimal.eff_std);
  std::printf("  min gap margin: %.3f m, guard activations: %d, held: %d\n",
              out.report.safety.min_gap_margin,
              out.report.safety.guard_activations,
              out.report.safety.held_vehicles);
  if (!out_dir.empty()) {
    emit_outputs(out, out_dir);
    std::printf("  outputs written to %s\n", out_dir.c_str());
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, int seeds,
              const std::string& out_dir) {
  ScenarioConfig base = base_config(config_path);
  base.log_trajectories = false;
  base.pt_policy = PtPolicyKind::both;

  const ParetoTable table =
      build_pareto_table(base.powertrain.table_grids, base.powertrain);

  struct Key {
    DemandLevel demand;
    ScenarioKind scenario;
    unsigned long seed;
    bool operator<(const Key& o) const {
      if (demand != o.demand) return demand < o.demand;
      if (scenario != o.scenario) return scenario < o.scenario;
      return seed < o.seed;
    }
  };
  std::map<Key, MetricsReport> reports;

  for (DemandLevel demand :
       {DemandLevel::light, DemandLevel::medium, DemandLevel::heavy}) {
    for (ScenarioKind scenario : {ScenarioKind::baseline, ScenarioKind::isolated,
                                  ScenarioKind::corridor}) {
      for (int s = 1; s <= seeds; ++s) {
        ScenarioConfig cfg = base;
        cfg.demand = demand;
        cfg.scenario = scenario;
        cfg.seed = static_cast<unsigned long>(s);
        RunOutputs out = run_scenario(cfg, &table);
        reports.emplace(Key{demand, scenario, cfg.seed}, std::move(out.report));
      }
    }
  }

  nlohmann::json comparison = nlohmann::json::array();
  std::printf("%-8s %-4s %-20s %12s %12s %10s\n", "demand", "seed", "treatment",
              "fuel imp %", "eff mean", "eff std");
  for (DemandLevel demand :
       {DemandLevel::light, DemandLevel::medium, DemandLevel::heavy}) {
    for (int s = 1; s <= seeds; ++s) {
      const auto& base_rep =
          reports.at(Key{demand, ScenarioKind::baseline,
                         static_cast<unsigned long>(s)});
      for (ScenarioKind scenario :
           {ScenarioKind::isolated, ScenarioKind::corridor}) {
        const auto& treat = reports.at(
            Key{demand, scenario, static_cast<unsigned long>(s)});
        for (PtVariant variant : {PtVariant::baseline, PtVariant::optimal}) {
          const Improvement imp =
              compare_runs(base_rep, PtVariant::baseline, treat, variant);
          std::printf("%-8s %-4d %-20s %12.2f %12.4f %10.4f\n",
                      to_string(demand).c_str(), s, imp.treatment_label.c_str(),
                      imp.fuel_g_per_km_improvement_pct, imp.eff_mean_treat,
                      imp.eff_std_treat);
          comparison.push_back(
              {{"demand", to_string(demand)},
               {"seed", s},
               {"treatment", imp.treatment_label},
               {"fuel_g_per_km_improvement_pct", imp.fuel_g_per_km_improvement_pct},
               {"eff_mean", imp.eff_mean_treat},
               {"eff_std", imp.eff_std_treat},
               {"travel_time_change_pct", imp.travel_time_change_pct}});
        }
      }
    }
  }
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::ofstream f(out_dir + "/comparison.json");
    f << comparison.dump(2) << '\n';
    std::printf("comparison written to %s/comparison.json\n", out_dir.c_str());
  }
  return 0;
}

int cmd_build_table(const std::string& config_path, const std::string& out_path) {
  ScenarioConfig cfg = base_config(config_path);
  const ParetoTable table =
      build_pareto_table(cfg.powertrain.table_grids, cfg.powertrain);
  std::ofstream f(out_path);
  if (!f) {
    std::fprintf(stderr, "cannot open %s\n", out_path.c_str());
    return 1;
  }
  table.save_csv(f);
  std::printf("wrote %zu cells to %s\n", table.cell_count(), out_path.c_str());
  return 0;
}

int cmd_verify(const std::string& config_path, bool quick) {
  ScenarioConfig cfg = base_config(config_path);
  const auto& pt = cfg.powertrain;
  std::vector<oracles::CheckResult> results;
  results.push_back(oracles::solver_hand_suite());
  results.push_back(oracles::solver_random_suite(quick ? 50 : 200, 1000, 42, 1e-6));
  results.push_back(oracles::pareto_random_suite(quick ? 200 : 1000, 7, pt, 1e-12));
  {
    const ParetoTable table = build_pareto_table(pt.table_grids, pt);
    results.push_back(
        oracles::online_random_suite(table, quick ? 200 : 1000, 11, pt, 0.02));
  }
  results.push_back(oracles::mdp_suite(pt, 1e-9));

  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corridor microsimulator for connected automated plug-in hybrids"};
  app.require_subcommand(1);

  std::string config_path, out_dir, scenario, demand, pt;
  unsigned long seed = 0;
  double duration = 0.0;
  int seeds = 5;
  std::string table_out = "pareto_table.csv";
  bool quick = false;

  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("--config", config_path, "config JSON path");
  run->add_option("--scenario", scenario, "baseline|isolated|corridor");
  run->add_option("--demand", demand, "light|medium|heavy");
  run->add_option("--seed", seed, "random seed (nonzero overrides config)");
  run->add_option("--pt", pt, "baseline|optimal|both");
  run->add_option("--duration", duration, "simulated seconds");
  run->add_option("--out", out_dir, "output directory for CSV/JSON");

  auto* sweep = app.add_subcommand("sweep",
                                   "3 scenarios x 3 demand levels x seeds");
  sweep->add_option("--config", config_path, "config JSON path");
  sweep->add_option("--seeds", seeds, "number of seeds (1..N)");
  sweep->add_option("--out", out_dir, "output directory");

  auto* build = app.add_subcommand("build-table", "precompute the torque-split table");
  build->add_option("--config", config_path, "config JSON path");
  build->add_option("--out", table_out, "output CSV path");

  auto* verify = app.add_subcommand("verify", "run the oracle suites");
  verify->add_option("--config", config_path, "config JSON path");
  verify->add_flag("--quick", quick, "smaller sample sizes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, scenario, demand, seed, pt, duration, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, seeds, out_dir);
    if (build->parsed()) return cmd_build_table(config_path, table_out);
    if (verify->parsed()) return cmd_verify(config_path, quick);
  } catch (const cavsim::SafetyViolationError& e) {
    std::fprintf(stderr, "SAFETY VIOLATION: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
