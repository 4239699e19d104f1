#include "cavsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace cavsim {

using nlohmann::json;

PtVariantMetrics pt_metrics_from_ledger(const EnergyLedger& l,
                                        double distance_km,
                                        double fuel_lhv_j_per_kg) {
  PtVariantMetrics m;
  m.fuel_g = l.fuel_g;
  m.battery_out_wh = l.battery_out_wh;
  m.battery_in_wh = l.battery_in_wh;
  m.brake_wh = l.brake_wh;
  m.wheel_mech_wh = l.wheel_mech_wh;
  m.engine_mech_wh = l.engine_mech_wh;
  m.motor_mech_wh = l.motor_mech_wh;
  m.avg_efficiency = l.average_efficiency();
  m.cost_sum = l.cost_sum;
  m.stages = l.stages;
  m.active_stages = l.active_stages;
  if (distance_km > 0.0) {
    m.fuel_g_per_km = l.fuel_g / distance_km;
    m.battery_net_wh_per_km = l.battery_net_wh() / distance_km;
    const double fuel_wh = l.fuel_g / 1000.0 * fuel_lhv_j_per_kg / 3600.0;
    m.combined_wh_per_km = (fuel_wh + l.battery_net_wh()) / distance_km;
  }
  return m;
}

namespace {

struct Welford {
  int n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double stddev() const { return n > 1 ? std::sqrt(m2 / n) : 0.0; }
};

PtFleetAggregate pt_aggregate(const std::vector<VehicleMetrics>& vehicles,
                              bool optimal) {
  PtFleetAggregate out;
  Welford fuel, batt, eff;
  for (const auto& v : vehicles) {
    if (!v.counted) continue;
    const auto& m = optimal ? v.pt_optimal : v.pt_baseline;
    fuel.add(m.fuel_g_per_km);
    batt.add(m.battery_net_wh_per_km);
    eff.add(m.avg_efficiency);
  }
  out.fuel_g_per_km_mean = fuel.mean;
  out.battery_net_wh_per_km_mean = batt.mean;
  out.eff_mean = eff.mean;
  out.eff_std = eff.stddev();
  return out;
}

}  // namespace

FleetAggregate aggregate_fleet(const std::vector<VehicleMetrics>& vehicles) {
  FleetAggregate f;
  Welford tt, effort;
  for (const auto& v : vehicles) {
    if (!v.counted) continue;
    ++f.counted;
    tt.add(v.travel_time);
    effort.add(v.effort_cost);
    f.stop_events += v.stop_events;
    f.stop_events_in_control_zones += v.stop_events_in_control_zones;
  }
  f.mean_travel_time = tt.mean;
  f.effort_cost_mean = effort.mean;
  f.pt_baseline = pt_aggregate(vehicles, false);
  f.pt_optimal = pt_aggregate(vehicles, true);
  return f;
}

namespace {

json pt_to_json(const PtVariantMetrics& m) {
  return json{{"fuel_g", m.fuel_g},
              {"fuel_g_per_km", m.fuel_g_per_km},
              {"combined_wh_per_km", m.combined_wh_per_km},
              {"battery_out_wh", m.battery_out_wh},
              {"battery_in_wh", m.battery_in_wh},
              {"battery_net_wh_per_km", m.battery_net_wh_per_km},
              {"brake_wh", m.brake_wh},
              {"wheel_mech_wh", m.wheel_mech_wh},
              {"engine_mech_wh", m.engine_mech_wh},
              {"motor_mech_wh", m.motor_mech_wh},
              {"avg_efficiency", m.avg_efficiency},
              {"cost_sum", m.cost_sum},
              {"stages", m.stages},
              {"active_stages", m.active_stages}};
}

PtVariantMetrics pt_from_json(const json& j) {
  PtVariantMetrics m;
  m.fuel_g = j.at("fuel_g");
  m.fuel_g_per_km = j.at("fuel_g_per_km");
  m.combined_wh_per_km = j.at("combined_wh_per_km");
  m.battery_out_wh = j.at("battery_out_wh");
  m.battery_in_wh = j.at("battery_in_wh");
  m.battery_net_wh_per_km = j.at("battery_net_wh_per_km");
  m.brake_wh = j.at("brake_wh");
  m.wheel_mech_wh = j.at("wheel_mech_wh");
  m.engine_mech_wh = j.at("engine_mech_wh");
  m.motor_mech_wh = j.at("motor_mech_wh");
  m.avg_efficiency = j.at("avg_efficiency");
  m.cost_sum = j.at("cost_sum");
  m.stages = j.at("stages");
  m.active_stages = j.at("active_stages");
  return m;
}

json pt_fleet_to_json(const PtFleetAggregate& a) {
  return json{{"fuel_g_per_km_mean", a.fuel_g_per_km_mean},
              {"battery_net_wh_per_km_mean", a.battery_net_wh_per_km_mean},
              {"eff_mean", a.eff_mean},
              {"eff_std", a.eff_std}};
}

PtFleetAggregate pt_fleet_from_json(const json& j) {
  PtFleetAggregate a;
  a.fuel_g_per_km_mean = j.at("fuel_g_per_km_mean");
  a.battery_net_wh_per_km_mean = j.at("battery_net_wh_per_km_mean");
  a.eff_mean = j.at("eff_mean");
  a.eff_std = j.at("eff_std");
  return a;
}

}  // namespace

json MetricsReport::to_json() const {
  json j;
  j["config"] = cavsim::to_json(config);
  j["spawned"] = spawned;
  j["completed"] = completed;
  j["max_conservation_error_m"] = max_conservation_error_m;
  j["safety"] = {{"cav_gap_violations", safety.cav_gap_violations},
                 {"baseline_undershoots", safety.baseline_undershoots},
                 {"min_gap_margin", safety.min_gap_margin},
                 {"guard_activations", safety.guard_activations},
                 {"held_vehicles", safety.held_vehicles},
                 {"max_schedule_deviation", safety.max_schedule_deviation}};
  j["fleet"] = {{"counted", fleet.counted},
                {"mean_travel_time", fleet.mean_travel_time},
                {"stop_events", fleet.stop_events},
                {"stop_events_in_control_zones", fleet.stop_events_in_control_zones},
                {"effort_cost_mean", fleet.effort_cost_mean},
                {"pt_baseline", pt_fleet_to_json(fleet.pt_baseline)},
                {"pt_optimal", pt_fleet_to_json(fleet.pt_optimal)}};
  json xs = json::array();
  for (const auto& c : crossings)
    xs.push_back(json{{"vehicle", c.vehicle},
                      {"zone", c.zone},
                      {"time", c.time},
                      {"path", c.path}});
  j["crossings"] = xs;
  json rows = json::array();
  for (const auto& v : vehicles) {
    rows.push_back(json{{"id", v.id},
                        {"approach", v.approach},
                        {"entry_time", v.entry_time},
                        {"exit_time", v.exit_time},
                        {"travel_time", v.travel_time},
                        {"distance_km", v.distance_km},
                        {"stop_events", v.stop_events},
                        {"stop_events_in_control_zones", v.stop_events_in_control_zones},
                        {"effort_cost", v.effort_cost},
                        {"srz_speed_max", v.srz_speed_max},
                        {"flagged", v.flagged},
                        {"counted", v.counted},
                        {"pt_baseline", pt_to_json(v.pt_baseline)},
                        {"pt_optimal", pt_to_json(v.pt_optimal)}});
  }
  j["vehicles"] = rows;
  return j;
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.config = config_from_json(j.at("config"));
  r.spawned = j.at("spawned");
  r.completed = j.at("completed");
  r.max_conservation_error_m = j.at("max_conservation_error_m");
  const auto& s = j.at("safety");
  r.safety.cav_gap_violations = s.at("cav_gap_violations");
  r.safety.baseline_undershoots = s.at("baseline_undershoots");
  r.safety.min_gap_margin = s.at("min_gap_margin");
  r.safety.guard_activations = s.at("guard_activations");
  r.safety.held_vehicles = s.at("held_vehicles");
  r.safety.max_schedule_deviation = s.at("max_schedule_deviation");
  for (const auto& c : j.at("crossings")) {
    r.crossings.push_back(
        {c.at("vehicle"), c.at("zone"), c.at("time"), c.at("path")});
  }
  const auto& f = j.at("fleet");
  r.fleet.counted = f.at("counted");
  r.fleet.mean_travel_time = f.at("mean_travel_time");
  r.fleet.stop_events = f.at("stop_events");
  r.fleet.stop_events_in_control_zones = f.at("stop_events_in_control_zones");
  r.fleet.effort_cost_mean = f.at("effort_cost_mean");
  r.fleet.pt_baseline = pt_fleet_from_json(f.at("pt_baseline"));
  r.fleet.pt_optimal = pt_fleet_from_json(f.at("pt_optimal"));
  for (const auto& row : j.at("vehicles")) {
    VehicleMetrics v;
    v.id = row.at("id");
    v.approach = row.at("approach");
    v.entry_time = row.at("entry_time");
    v.exit_time = row.at("exit_time");
    v.travel_time = row.at("travel_time");
    v.distance_km = row.at("distance_km");
    v.stop_events = row.at("stop_events");
    v.stop_events_in_control_zones = row.at("stop_events_in_control_zones");
    v.effort_cost = row.at("effort_cost");
    v.srz_speed_max = row.at("srz_speed_max");
    v.flagged = row.at("flagged");
    v.counted = row.at("counted");
    v.pt_baseline = pt_from_json(row.at("pt_baseline"));
    v.pt_optimal = pt_from_json(row.at("pt_optimal"));
    r.vehicles.push_back(std::move(v));
  }
  return r;
}

Improvement compare_runs(const MetricsReport& base, PtVariant base_variant,
                         const MetricsReport& treatment,
                         PtVariant treatment_variant) {
  if (!comparable_configs(base.config, treatment.config))
    throw std::invalid_argument("compare_runs: runs are not comparable");
  const auto& fb = base_variant == PtVariant::optimal ? base.fleet.pt_optimal
                                                      : base.fleet.pt_baseline;
  const auto& ft = treatment_variant == PtVariant::optimal
                       ? treatment.fleet.pt_optimal
                       : treatment.fleet.pt_baseline;
  Improvement imp;
  imp.base_label = to_string(base.config.scenario) + "+" +
                   (base_variant == PtVariant::optimal ? "optPT" : "basePT");
  imp.treatment_label =
      to_string(treatment.config.scenario) + "+" +
      (treatment_variant == PtVariant::optimal ? "optPT" : "basePT");
  if (std::abs(fb.fuel_g_per_km_mean) > 1e-9)
    imp.fuel_g_per_km_improvement_pct =
        (fb.fuel_g_per_km_mean - ft.fuel_g_per_km_mean) /
        fb.fuel_g_per_km_mean * 100.0;
  imp.eff_mean_base = fb.eff_mean;
  imp.eff_mean_treat = ft.eff_mean;
  imp.eff_std_base = fb.eff_std;
  imp.eff_std_treat = ft.eff_std;
  if (base.fleet.mean_travel_time > 0.0)
    imp.travel_time_change_pct =
        (treatment.fleet.mean_travel_time - base.fleet.mean_travel_time) /
        base.fleet.mean_travel_time * 100.0;
  return imp;
}

void emit_outputs(const RunOutputs& outputs, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("emit_outputs: cannot create " + out_dir);

  {
    std::ofstream f(out_dir + "/trajectories.csv");
    if (!f) throw std::runtime_error("emit_outputs: cannot write trajectories.csv");
    f << "t,id,p,v,u,t_eng,t_mot,fuel_rate_g_s\n";
    for (const auto& r : outputs.trajectories)
      f << r.t << ',' << r.id << ',' << r.p << ',' << r.v << ',' << r.u << ','
        << r.t_eng << ',' << r.t_mot << ',' << r.fuel_rate_g_s << '\n';
  }
  {
    std::ofstream f(out_dir + "/speed_profile.csv");
    if (!f) throw std::runtime_error("emit_outputs: cannot write speed_profile.csv");
    f << "t,id,p,v\n";
    for (const auto& r : outputs.trajectories)
      f << r.t << ',' << r.id << ',' << r.p << ',' << r.v << '\n';
  }
  {
    std::ofstream f(out_dir + "/schedule.csv");
    if (!f) throw std::runtime_error("emit_outputs: cannot write schedule.csv");
    f << (outputs.schedule_csv.empty() ? "vehicle,zone,assigned_time\n"
                                       : outputs.schedule_csv);
  }
  {
    std::ofstream f(out_dir + "/summary.json");
    if (!f) throw std::runtime_error("emit_outputs: cannot write summary.json");
    f << outputs.report.to_json().dump(2) << '\n';
  }
}

}  // namespace cavsim
