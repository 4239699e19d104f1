#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsim/config.hpp"
#include "cavsim/powertrain.hpp"

namespace cavsim {

struct PtVariantMetrics {
  double fuel_g = 0.0;
  double fuel_g_per_km = 0.0;
  double battery_out_wh = 0.0;
  double battery_in_wh = 0.0;
  double battery_net_wh_per_km = 0.0;
  // Fuel chemical energy plus net battery draw, per km.
  double combined_wh_per_km = 0.0;
  double brake_wh = 0.0;
  double wheel_mech_wh = 0.0;
  double engine_mech_wh = 0.0;
  double motor_mech_wh = 0.0;
  double avg_efficiency = 1.0;  // over stages with nonzero demand
  double cost_sum = 0.0;
  std::int64_t stages = 0;
  std::int64_t active_stages = 0;
};

PtVariantMetrics pt_metrics_from_ledger(const EnergyLedger& ledger,
                                        double distance_km,
                                        double fuel_lhv_j_per_kg = 44.0e6);

struct VehicleMetrics {
  VehicleId id = 0;
  std::string approach;
  double entry_time = 0.0;
  double exit_time = 0.0;
  double travel_time = 0.0;
  double distance_km = 0.0;
  int stop_events = 0;
  int stop_events_in_control_zones = 0;
  double effort_cost = 0.0;  // (1/2) integral u^2 dt over the corridor
  double srz_speed_max = 0.0;  // max speed past the settling depth of the SRZ
  bool flagged = false;        // held by the scheduler or guard-deviated
  bool counted = false;        // entered after warmup and completed
  PtVariantMetrics pt_baseline;
  PtVariantMetrics pt_optimal;
};

struct PtFleetAggregate {
  double fuel_g_per_km_mean = 0.0;
  double battery_net_wh_per_km_mean = 0.0;
  double eff_mean = 0.0;
  double eff_std = 0.0;
};

struct FleetAggregate {
  int counted = 0;
  double mean_travel_time = 0.0;
  int stop_events = 0;
  int stop_events_in_control_zones = 0;
  double effort_cost_mean = 0.0;
  PtFleetAggregate pt_baseline;
  PtFleetAggregate pt_optimal;
};

/// Recomputes the fleet aggregate from the per-vehicle rows (vehicles with
/// counted == false are ignored).
FleetAggregate aggregate_fleet(const std::vector<VehicleMetrics>& vehicles);

struct SafetyStats {
  int cav_gap_violations = 0;       // must stay 0; a run aborts on the first
  int baseline_undershoots = 0;     // transient dips below the safe gap
  double min_gap_margin = 1e9;      // min of (gap - required) over the run
  int guard_activations = 0;
  int held_vehicles = 0;
  double max_schedule_deviation = 0.0;  // realized vs scheduled zone entry
};

/// Realized conflict-zone entry, including vehicles still on the road when
/// the run ends.
struct CrossingRecord {
  VehicleId vehicle = 0;
  ZoneId zone = 0;
  double time = 0.0;
  std::string path;
};

struct MetricsReport {
  ScenarioConfig config;
  std::vector<VehicleMetrics> vehicles;
  std::vector<CrossingRecord> crossings;
  FleetAggregate fleet;
  SafetyStats safety;
  int spawned = 0;
  int completed = 0;
  double max_conservation_error_m = 0.0;

  nlohmann::json to_json() const;
};

MetricsReport report_from_json(const nlohmann::json& j);

enum class PtVariant { baseline, optimal };

struct Improvement {
  std::string base_label;
  std::string treatment_label;
  double fuel_g_per_km_improvement_pct = 0.0;  // (base - treat)/base * 100
  double eff_mean_base = 0.0;
  double eff_mean_treat = 0.0;
  double eff_std_base = 0.0;
  double eff_std_treat = 0.0;
  double travel_time_change_pct = 0.0;
};

/// Percentage improvements of `treatment` over `base`. Throws when the two
/// runs are not comparable (different demand level or corridor setup).
Improvement compare_runs(const MetricsReport& base, PtVariant base_variant,
                         const MetricsReport& treatment,
                         PtVariant treatment_variant);

struct TrajectoryRow {
  double t;
  VehicleId id;
  double p, v, u, t_eng, t_mot, fuel_rate_g_s;
};

struct RunOutputs {
  MetricsReport report;
  std::vector<TrajectoryRow> trajectories;
  std::string schedule_csv;  // vehicle,zone,assigned_time rows
};

/// Writes trajectories.csv, speed_profile.csv, schedule.csv and
/// summary.json under out_dir (created if missing).
void emit_outputs(const RunOutputs& outputs, const std::string& out_dir);

}  // namespace cavsim
