#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cavsim {

/// Road-load / driveline constants for the torque-demand map.
struct VehicleLoadParams {
  double mass = 1800.0;          // kg
  double drag_coef = 0.3;
  double frontal_area = 2.3;     // m^2
  double rolling_coef = 0.009;
  double air_density = 1.225;    // kg/m^3
  double wheel_radius = 0.32;    // m
  double driveline_ratio = 3.5;  // lumped gear ratio
  double gravity = 9.81;         // m/s^2
};

struct TorqueDemand {
  double torque = 0.0;       // Nm at the shaft (after the driveline ratio)
  double wheel_speed = 0.0;  // rad/s
  double shaft_rpm = 0.0;    // rpm on the engine/motor side
};

/// Longitudinal-load torque demand for speed v and acceleration a.
TorqueDemand torque_demand(double v, double a, const VehicleLoadParams& p);

/// Smooth single-peak efficiency surface eta(N, T).
struct EfficiencyMap {
  double peak_eff = 0.36;
  double peak_speed_rpm = 2500.0;
  double speed_width_rpm = 1800.0;
  double peak_torque_nm = 170.0;
  double torque_width_nm = 140.0;
  double max_speed_rpm = 5000.0;
  double max_torque_nm = 250.0;
  bool torque_sign_symmetric = false;  // motors drive and regenerate

  /// eta at (N, T); arguments outside the domain box are clamped and
  /// reported through `clamped` when provided.
  double value(double speed_rpm, double torque_nm,
               bool* clamped = nullptr) const;
};

struct PowertrainState {
  double engine_rpm = 0.0;  // 0 when the engine is off, else >= idle
  double motor_rpm = 0.0;
};

struct TorqueSplit {
  double engine = 0.0;  // Nm, >= 0
  double motor = 0.0;   // Nm, signed (negative = regeneration)
};

struct SplitResult {
  TorqueSplit split;
  double brake = 0.0;  // Nm of friction braking beyond the regen limit (<= 0)
  bool out_of_envelope = false;
};

struct ParetoGrids {
  double n_eng_step = 250.0;
  double n_mot_step = 250.0;
  double t_driver_step = 10.0;
  double alpha_step = 0.1;
};

struct PowertrainParams {
  EfficiencyMap engine;  // defaults above
  EfficiencyMap motor{0.90, 3000.0, 4000.0, 100.0, 250.0, 6000.0, 280.0, true};
  VehicleLoadParams load;
  double idle_rpm = 800.0;
  double alpha = 0.5;             // deployed efficiency weight
  double fuel_lhv_j_per_kg = 44.0e6;
  double baseline_motor_only_below_nm = 60.0;
  double split_grid_step_nm = 1.0;
  ParetoGrids table_grids;
  std::optional<double> battery_capacity_wh;  // discharge clamp when set

  double max_demand() const { return engine.max_torque_nm + motor.max_torque_nm; }
  double min_demand() const { return -motor.max_torque_nm; }
};

/// Weighted objective of Eq.-style torque splitting: an engine producing
/// no torque contributes nothing, likewise an idle motor.
double split_objective(const PowertrainState& state, const TorqueSplit& split,
                       double alpha, const PowertrainParams& p);

/// Argmax of the weighted efficiency over the feasible torque grid
/// (engine torque stepped at split_grid_step_nm between its bounds, the
/// exact upper bound included; motor takes the remainder). Braking demand
/// goes to the motor alone, engine off. Ties resolve toward the smallest
/// engine torque. Positive demand beyond the combined envelope throws
/// std::domain_error; braking beyond the regen limit spills to `brake`.
SplitResult pareto_split(const PowertrainState& state, double t_driver,
                         double alpha, const PowertrainParams& p);

/// Rule-based reference controller: motor alone for small demand and all
/// braking, engine alone above the threshold, motor assist past engine max.
SplitResult baseline_policy(const PowertrainState& state, double t_driver,
                            const PowertrainParams& p);

/// Offline table of pareto_split over (N_eng, N_mot, T_driver, alpha).
class ParetoTable {
 public:
  ParetoTable() = default;
  ParetoTable(ParetoGrids grids, const PowertrainParams& params);

  std::size_t cell_count() const { return cells_.size(); }
  const ParetoGrids& grids() const { return grids_; }

  struct Query {
    double engine_rpm, motor_rpm, t_driver, alpha;
  };

  /// Stored split of the nearest grid cell.
  TorqueSplit nearest(const Query& q) const;

  /// Nearest cell index per axis, plus stored splits of the +-1 axis
  /// neighbors (for lookup refinement).
  std::vector<TorqueSplit> neighborhood(const Query& q) const;

  bool covers(const Query& q) const;

  void save_csv(std::ostream& out) const;
  static ParetoTable load_csv(std::istream& in);

  const std::vector<TorqueSplit>& cells() const { return cells_; }
  struct Axis {
    double lo = 0.0, step = 1.0;
    int count = 0;
    int index_of(double x) const;
    double value(int i) const { return lo + i * step; }
  };
  const Axis& axis(int i) const { return axes_[i]; }

 private:
  std::size_t flat_index(int i0, int i1, int i2, int i3) const;
  ParetoGrids grids_;
  Axis axes_[4];  // n_eng, n_mot, t_driver, alpha
  std::vector<TorqueSplit> cells_;
  // Echo of the map constants the table was built from.
  double engine_peak_ = 0.0, motor_peak_ = 0.0;
};

ParetoTable build_pareto_table(const ParetoGrids& grids,
                               const PowertrainParams& params);

/// Online controller: nearest-cell lookup refined over the stored splits of
/// the adjacent cells, with the motor torque repaired so the split sums to
/// the exact demand. Demand outside the table envelope falls back to the
/// direct computation and is flagged.
SplitResult online_policy(const ParetoTable& table, const PowertrainState& state,
                          double t_driver, double alpha,
                          const PowertrainParams& p);

/// Per-vehicle energy bookkeeping. Stage cost k is 1 minus the weighted
/// efficiency of the units actually exchanging torque; idle stages
/// (zero demand) cost nothing.
struct EnergyLedger {
  double fuel_g = 0.0;
  double battery_out_wh = 0.0;
  double battery_in_wh = 0.0;
  double brake_wh = 0.0;
  double wheel_mech_wh = 0.0;
  double engine_mech_wh = 0.0;
  double motor_mech_wh = 0.0;
  double cost_sum = 0.0;
  std::int64_t stages = 0;
  std::int64_t active_stages = 0;

  double average_cost() const;       // cost_sum / stages
  double average_efficiency() const; // 1 - cost_sum / active_stages
  double battery_net_wh() const { return battery_out_wh - battery_in_wh; }
};

/// One bookkeeping stage of duration dt under the given split.
void step_energy(EnergyLedger& ledger, const PowertrainState& state,
                 const SplitResult& result, double t_driver, double shaft_rpm,
                 double alpha, double dt, const PowertrainParams& p);

/// One-stage cost of a split (the ledger increment of cost_sum).
double stage_cost(const PowertrainState& state, const SplitResult& result,
                  double t_driver, double alpha, const PowertrainParams& p);

struct DemandSample {
  PowertrainState state;
  double t_driver = 0.0;
  double shaft_rpm = 0.0;
};

using SplitPolicy =
    std::function<SplitResult(const PowertrainState&, double t_driver)>;

/// Empirical long-run average cost of `policy` over the demand sequence.
double evaluate_average_cost(const SplitPolicy& policy,
                             const std::vector<DemandSample>& demands,
                             double alpha, const PowertrainParams& p);

}  // namespace cavsim
