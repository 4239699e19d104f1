#include "cavsim/powertrain.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

namespace cavsim {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kTorqueEps = 1e-12;

double rpm_to_rad_s(double rpm) { return rpm * kTwoPi / 60.0; }

}  // namespace

TorqueDemand torque_demand(double v, double a, const VehicleLoadParams& p) {
  if (v < 0.0) throw std::domain_error("torque_demand: negative speed");
  const double aero = 0.5 * p.air_density * p.drag_coef * p.frontal_area * v * v;
  const double rolling = (v > 0.0) ? p.mass * p.gravity * p.rolling_coef : 0.0;
  const double force = p.mass * a + aero + rolling;
  TorqueDemand d;
  d.torque = force * p.wheel_radius / p.driveline_ratio;
  d.wheel_speed = v / p.wheel_radius;
  d.shaft_rpm = d.wheel_speed * p.driveline_ratio * 60.0 / kTwoPi;
  return d;
}

double EfficiencyMap::value(double speed_rpm, double torque_nm,
                            bool* clamped) const {
  double t = torque_sign_symmetric ? std::abs(torque_nm) : torque_nm;
  bool flag = false;
  if (speed_rpm < 0.0 || speed_rpm > max_speed_rpm) flag = true;
  if (t < 0.0 || t > max_torque_nm) flag = true;
  const double n = std::clamp(speed_rpm, 0.0, max_speed_rpm);
  t = std::clamp(t, 0.0, max_torque_nm);
  if (clamped) *clamped = flag;
  const double dn = (n - peak_speed_rpm) / speed_width_rpm;
  const double dt = (t - peak_torque_nm) / torque_width_nm;
  return peak_eff * std::exp(-dn * dn - dt * dt);
}

double split_objective(const PowertrainState& state, const TorqueSplit& split,
                       double alpha, const PowertrainParams& p) {
  double obj = 0.0;
  if (split.engine > kTorqueEps)
    obj += alpha * p.engine.value(state.engine_rpm, split.engine);
  if (std::abs(split.motor) > kTorqueEps)
    obj += (1.0 - alpha) * p.motor.value(state.motor_rpm, split.motor);
  return obj;
}

SplitResult pareto_split(const PowertrainState& state, double t_driver,
                         double alpha, const PowertrainParams& p) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("pareto_split: alpha outside [0,1]");
  SplitResult r;
  if (t_driver > p.max_demand() + 1e-9)
    throw std::domain_error("pareto_split: demand exceeds combined torque envelope");

  if (t_driver <= 0.0) {
    // Braking: the engine is not fired against the brake; the motor
    // regenerates up to its limit and friction takes the rest.
    r.split.engine = 0.0;
    r.split.motor = std::max(t_driver, -p.motor.max_torque_nm);
    r.brake = t_driver - r.split.motor;  // <= 0
    return r;
  }

  const double lo = std::max(0.0, t_driver - p.motor.max_torque_nm);
  const double hi = std::min(p.engine.max_torque_nm,
                             t_driver + p.motor.max_torque_nm);
  const double step = p.split_grid_step_nm;

  double best_obj = -1.0;
  TorqueSplit best;
  auto consider = [&](double t_eng) {
    TorqueSplit s{t_eng, t_driver - t_eng};
    const double obj = split_objective(state, s, alpha, p);
    if (obj > best_obj + kTorqueEps) {
      best_obj = obj;
      best = s;
    }
  };
  // Grid contract: lo + k*step for every k with lo + k*step < hi, then hi
  // itself. Ascending scan with strict improvement keeps the smallest
  // engine torque on ties.
  for (int k = 0; lo + k * step < hi; ++k) consider(lo + k * step);
  consider(hi);

  r.split = best;
  return r;
}

SplitResult baseline_policy(const PowertrainState& state, double t_driver,
                            const PowertrainParams& p) {
  (void)state;
  SplitResult r;
  if (t_driver > p.max_demand() + 1e-9)
    throw std::domain_error("baseline_policy: demand exceeds combined torque envelope");
  if (t_driver <= 0.0) {
    r.split.engine = 0.0;
    r.split.motor = std::max(t_driver, -p.motor.max_torque_nm);
    r.brake = t_driver - r.split.motor;
  } else if (t_driver <= p.baseline_motor_only_below_nm) {
    r.split = {0.0, t_driver};
  } else if (t_driver <= p.engine.max_torque_nm) {
    r.split = {t_driver, 0.0};
  } else {
    r.split = {p.engine.max_torque_nm, t_driver - p.engine.max_torque_nm};
  }
  return r;
}

int ParetoTable::Axis::index_of(double x) const {
  const int i = static_cast<int>(std::lround((x - lo) / step));
  return std::clamp(i, 0, count - 1);
}

std::size_t ParetoTable::flat_index(int i0, int i1, int i2, int i3) const {
  return ((static_cast<std::size_t>(i0) * axes_[1].count + i1) * axes_[2].count +
          i2) * axes_[3].count + i3;
}

ParetoTable::ParetoTable(ParetoGrids grids, const PowertrainParams& params)
    : grids_(grids) {
  auto make_axis = [](double lo, double hi, double step) {
    Axis a;
    a.lo = lo;
    a.step = step;
    a.count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    return a;
  };
  axes_[0] = make_axis(0.0, params.engine.max_speed_rpm, grids.n_eng_step);
  axes_[1] = make_axis(0.0, params.motor.max_speed_rpm, grids.n_mot_step);
  axes_[2] = make_axis(params.min_demand(), params.max_demand(),
                       grids.t_driver_step);
  axes_[3] = make_axis(0.0, 1.0, grids.alpha_step);
  engine_peak_ = params.engine.peak_eff;
  motor_peak_ = params.motor.peak_eff;

  cells_.resize(static_cast<std::size_t>(axes_[0].count) * axes_[1].count *
                axes_[2].count * axes_[3].count);
  // Cells are independent; fill engine-speed slabs in parallel.
  auto fill_slab = [&](int i0_begin, int i0_end) {
    for (int i0 = i0_begin; i0 < i0_end; ++i0)
      for (int i1 = 0; i1 < axes_[1].count; ++i1)
        for (int i2 = 0; i2 < axes_[2].count; ++i2)
          for (int i3 = 0; i3 < axes_[3].count; ++i3) {
            const PowertrainState s{axes_[0].value(i0), axes_[1].value(i1)};
            const auto r = pareto_split(s, axes_[2].value(i2),
                                        axes_[3].value(i3), params);
            cells_[flat_index(i0, i1, i2, i3)] = r.split;
          }
  };
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  if (workers == 1 || axes_[0].count < 2) {
    fill_slab(0, axes_[0].count);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (axes_[0].count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int b = w * chunk;
      const int e = std::min(axes_[0].count, b + chunk);
      if (b < e) pool.emplace_back(fill_slab, b, e);
    }
    for (auto& th : pool) th.join();
  }
}

bool ParetoTable::covers(const Query& q) const {
  auto inside = [](const Axis& a, double x) {
    return x >= a.lo - 1e-9 && x <= a.value(a.count - 1) + 1e-9;
  };
  return inside(axes_[0], q.engine_rpm) && inside(axes_[1], q.motor_rpm) &&
         inside(axes_[2], q.t_driver) && inside(axes_[3], q.alpha);
}

TorqueSplit ParetoTable::nearest(const Query& q) const {
  return cells_[flat_index(axes_[0].index_of(q.engine_rpm),
                           axes_[1].index_of(q.motor_rpm),
                           axes_[2].index_of(q.t_driver),
                           axes_[3].index_of(q.alpha))];
}

std::vector<TorqueSplit> ParetoTable::neighborhood(const Query& q) const {
  const int c[4] = {axes_[0].index_of(q.engine_rpm),
                    axes_[1].index_of(q.motor_rpm),
                    axes_[2].index_of(q.t_driver), axes_[3].index_of(q.alpha)};
  std::vector<TorqueSplit> out;
  out.push_back(cells_[flat_index(c[0], c[1], c[2], c[3])]);
  for (int axis = 0; axis < 4; ++axis) {
    for (int d : {-1, +1}) {
      int idx[4] = {c[0], c[1], c[2], c[3]};
      idx[axis] += d;
      if (idx[axis] < 0 || idx[axis] >= axes_[axis].count) continue;
      out.push_back(cells_[flat_index(idx[0], idx[1], idx[2], idx[3])]);
    }
  }
  return out;
}

ParetoTable build_pareto_table(const ParetoGrids& grids,
                               const PowertrainParams& params) {
  return ParetoTable(grids, params);
}

void ParetoTable::save_csv(std::ostream& out) const {
  out << "# cavsim pareto table v1\n";
  out << "# engine_peak," << engine_peak_ << "\n";
  out << "# motor_peak," << motor_peak_ << "\n";
  const char* names[4] = {"n_eng_rpm", "n_mot_rpm", "t_driver_nm", "alpha"};
  for (int i = 0; i < 4; ++i)
    out << "# axis," << names[i] << ',' << axes_[i].lo << ',' << axes_[i].step
        << ',' << axes_[i].count << "\n";
  out << "n_eng_rpm,n_mot_rpm,t_driver_nm,alpha,t_eng_nm,t_mot_nm\n";
  out.precision(17);
  for (int i0 = 0; i0 < axes_[0].count; ++i0)
    for (int i1 = 0; i1 < axes_[1].count; ++i1)
      for (int i2 = 0; i2 < axes_[2].count; ++i2)
        for (int i3 = 0; i3 < axes_[3].count; ++i3) {
          const auto& s = cells_[flat_index(i0, i1, i2, i3)];
          out << axes_[0].value(i0) << ',' << axes_[1].value(i1) << ','
              << axes_[2].value(i2) << ',' << axes_[3].value(i3) << ','
              << s.engine << ',' << s.motor << '\n';
        }
}

ParetoTable ParetoTable::load_csv(std::istream& in) {
  ParetoTable t;
  std::string line;
  int axes_seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line);
      std::string tag, name;
      std::getline(ss, tag, ',');
      if (tag == "# axis") {
        Axis a;
        char comma;
        std::getline(ss, name, ',');
        ss >> a.lo >> comma >> a.step >> comma >> a.count;
        if (axes_seen < 4) t.axes_[axes_seen++] = a;
      } else if (tag == "# engine_peak") {
        ss >> t.engine_peak_;
      } else if (tag == "# motor_peak") {
        ss >> t.motor_peak_;
      }
      continue;
    }
    if (line.rfind("n_eng_rpm", 0) == 0) break;  // column header
  }
  if (axes_seen != 4)
    throw std::runtime_error("ParetoTable::load_csv: missing axis header");
  t.cells_.resize(static_cast<std::size_t>(t.axes_[0].count) *
                  t.axes_[1].count * t.axes_[2].count * t.axes_[3].count);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    double v[6];
    char comma;
    ss >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3] >> comma >>
        v[4] >> comma >> v[5];
    const std::size_t idx =
        t.flat_index(t.axes_[0].index_of(v[0]), t.axes_[1].index_of(v[1]),
                     t.axes_[2].index_of(v[2]), t.axes_[3].index_of(v[3]));
    t.cells_[idx] = {v[4], v[5]};
    ++rows;
  }
  if (rows != t.cells_.size())
    throw std::runtime_error("ParetoTable::load_csv: row count mismatch");
  return t;
}

SplitResult online_policy(const ParetoTable& table, const PowertrainState& state,
                          double t_driver, double alpha,
                          const PowertrainParams& p) {
  const ParetoTable::Query q{state.engine_rpm, state.motor_rpm, t_driver, alpha};
  if (!table.covers(q)) {
    SplitResult r = pareto_split(state, t_driver, alpha, p);
    r.out_of_envelope = true;
    return r;
  }
  if (t_driver <= 0.0) {
    SplitResult r;
    r.split.engine = 0.0;
    r.split.motor = std::max(t_driver, -p.motor.max_torque_nm);
    r.brake = t_driver - r.split.motor;
    return r;
  }

  SplitResult best;
  double best_obj = -1.0;
  for (const auto& cand : table.neighborhood(q)) {
    // Keep the stored engine set-point, repair the motor torque so the
    // split sums to the exact demand, then clamp.
    double t_eng = std::clamp(cand.engine, 0.0, p.engine.max_torque_nm);
    double t_mot = std::clamp(t_driver - t_eng, -p.motor.max_torque_nm,
                              p.motor.max_torque_nm);
    t_eng = std::clamp(t_driver - t_mot, 0.0, p.engine.max_torque_nm);
    t_mot = std::clamp(t_driver - t_eng, -p.motor.max_torque_nm,
                       p.motor.max_torque_nm);
    const TorqueSplit s{t_eng, t_mot};
    const double obj = split_objective(state, s, alpha, p);
    if (obj > best_obj + kTorqueEps) {
      best_obj = obj;
      best.split = s;
    }
  }
  best.brake = std::min(0.0, t_driver - (best.split.engine + best.split.motor));
  return best;
}

double stage_cost(const PowertrainState& state, const SplitResult& result,
                  double t_driver, double alpha, const PowertrainParams& p) {
  if (std::abs(t_driver) <= kTorqueEps) return 0.0;
  return 1.0 - split_objective(state, result.split, alpha, p);
}

void step_energy(EnergyLedger& ledger, const PowertrainState& state,
                 const SplitResult& result, double t_driver, double shaft_rpm,
                 double alpha, double dt, const PowertrainParams& p) {
  if (dt <= 0.0) throw std::invalid_argument("step_energy: dt <= 0");
  const double omega = rpm_to_rad_s(shaft_rpm);
  const double t_eng = result.split.engine;
  const double t_mot = result.split.motor;
  const double to_wh = dt / 3600.0;

  ledger.wheel_mech_wh += t_driver * omega * to_wh;
  ledger.engine_mech_wh += t_eng * omega * to_wh;
  ledger.motor_mech_wh += t_mot * omega * to_wh;
  ledger.brake_wh += -result.brake * omega * to_wh;

  if (t_eng > kTorqueEps) {
    const double eta = p.engine.value(state.engine_rpm, t_eng);
    const double omega_eng = rpm_to_rad_s(std::max(state.engine_rpm, p.idle_rpm));
    const double fuel_w = t_eng * omega_eng / eta;
    ledger.fuel_g += fuel_w * dt / p.fuel_lhv_j_per_kg * 1000.0;
  }
  if (t_mot > kTorqueEps) {
    const double eta = p.motor.value(state.motor_rpm, t_mot);
    ledger.battery_out_wh += t_mot * omega / eta * to_wh;
  } else if (t_mot < -kTorqueEps) {
    const double eta = p.motor.value(state.motor_rpm, t_mot);
    ledger.battery_in_wh += -t_mot * omega * eta * to_wh;
  }

  ledger.cost_sum += stage_cost(state, result, t_driver, alpha, p);
  ledger.stages += 1;
  if (std::abs(t_driver) > kTorqueEps) ledger.active_stages += 1;
}

double EnergyLedger::average_cost() const {
  return stages > 0 ? cost_sum / static_cast<double>(stages) : 0.0;
}

double EnergyLedger::average_efficiency() const {
  if (active_stages <= 0) return 1.0;
  return 1.0 - cost_sum / static_cast<double>(active_stages);
}

double evaluate_average_cost(const SplitPolicy& policy,
                             const std::vector<DemandSample>& demands,
                             double alpha, const PowertrainParams& p) {
  if (demands.empty())
    throw std::invalid_argument("evaluate_average_cost: empty demand sequence");
  double sum = 0.0;
  for (const auto& d : demands) {
    const SplitResult r = policy(d.state, d.t_driver);
    sum += stage_cost(d.state, r, d.t_driver, alpha, p);
  }
  return sum / static_cast<double>(demands.size());
}

}  // namespace cavsim
