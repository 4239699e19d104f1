#include "cavsim/config.hpp"

#include <fstream>
#include <stdexcept>

namespace cavsim {

using nlohmann::json;

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::baseline: return "baseline";
    case ScenarioKind::isolated: return "isolated";
    case ScenarioKind::corridor: return "corridor";
  }
  return "?";
}

std::string to_string(DemandLevel d) {
  switch (d) {
    case DemandLevel::light: return "light";
    case DemandLevel::medium: return "medium";
    case DemandLevel::heavy: return "heavy";
  }
  return "?";
}

std::string to_string(PtPolicyKind p) {
  switch (p) {
    case PtPolicyKind::baseline: return "baseline";
    case PtPolicyKind::optimal: return "optimal";
    case PtPolicyKind::both: return "both";
  }
  return "?";
}

ScenarioKind scenario_from_string(const std::string& s) {
  if (s == "baseline") return ScenarioKind::baseline;
  if (s == "isolated") return ScenarioKind::isolated;
  if (s == "corridor") return ScenarioKind::corridor;
  throw std::invalid_argument("unknown scenario: " + s);
}

DemandLevel demand_from_string(const std::string& s) {
  if (s == "light") return DemandLevel::light;
  if (s == "medium") return DemandLevel::medium;
  if (s == "heavy") return DemandLevel::heavy;
  throw std::invalid_argument("unknown demand level: " + s);
}

PtPolicyKind pt_policy_from_string(const std::string& s) {
  if (s == "baseline") return PtPolicyKind::baseline;
  if (s == "optimal") return PtPolicyKind::optimal;
  if (s == "both") return PtPolicyKind::both;
  throw std::invalid_argument("unknown pt policy: " + s);
}

double DemandRates::rate(DemandLevel level) const {
  switch (level) {
    case DemandLevel::light: return light;
    case DemandLevel::medium: return medium;
    case DemandLevel::heavy: return heavy;
  }
  return 0.0;
}

void ScenarioConfig::validate() const {
  if (!(dt > 0.0 && dt <= 0.5))
    throw std::invalid_argument("config: dt must be in (0, 0.5]");
  if (duration <= 0.0) throw std::invalid_argument("config: duration <= 0");
  if (warmup < 0.0 || warmup >= duration)
    throw std::invalid_argument("config: warmup must be in [0, duration)");
  if (rates.light < 0.0 || rates.medium < 0.0 || rates.heavy < 0.0)
    throw std::invalid_argument("config: negative arrival rate");
  if (powertrain.alpha < 0.0 || powertrain.alpha > 1.0)
    throw std::invalid_argument("config: alpha outside [0,1]");
  if (driver.time_headway < gap.time_headway)
    throw std::invalid_argument(
        "config: driver time headway below the safety model headway");
  if (driver.min_gap < gap.standstill_gap)
    throw std::invalid_argument(
        "config: driver min gap below the standstill safe gap");
  bounds.validate();
  gap.validate();
  driver.validate();
  corridor.validate();
}

ScenarioConfig default_config() { return ScenarioConfig{}; }

namespace {

json zone_to_json(const Zone& z) {
  json j;
  j["id"] = z.id;
  j["name"] = z.name;
  j["entry_pos"] = z.entry_pos;
  j["length"] = z.length;
  j["control_zone_start"] = z.control_zone_start;
  j["desired_speed"] = z.desired_speed;
  json pairs = json::array();
  for (const auto& [a, b] : z.conflict_pairs) pairs.push_back({a, b});
  j["conflict_pairs"] = pairs;
  return j;
}

Zone zone_from_json(const json& j, const Zone& base = {}) {
  Zone z = base;
  z.id = j.value("id", z.id);
  z.name = j.value("name", z.name);
  z.entry_pos = j.value("entry_pos", z.entry_pos);
  z.length = j.value("length", z.length);
  z.control_zone_start = j.value("control_zone_start", z.control_zone_start);
  z.desired_speed = j.value("desired_speed", z.desired_speed);
  if (j.contains("conflict_pairs")) {
    z.conflict_pairs.clear();
    for (const auto& p : j["conflict_pairs"])
      z.conflict_pairs.emplace_back(p.at(0).get<std::string>(),
                                    p.at(1).get<std::string>());
  }
  return z;
}

json approach_to_json(const Approach& a) {
  json j;
  j["name"] = a.name;
  j["lane"] = a.lane;
  j["join_pos"] = a.join_pos;
  j["spawn_speed"] = a.spawn_speed;
  j["demand_fraction"] = a.demand_fraction;
  j["route"] = a.route;
  return j;
}

Approach approach_from_json(const json& j) {
  Approach a;
  a.name = j.at("name").get<std::string>();
  a.lane = j.value("lane", a.name);
  a.join_pos = j.value("join_pos", 0.0);
  a.spawn_speed = j.value("spawn_speed", 17.0);
  a.demand_fraction = j.value("demand_fraction", 1.0);
  if (j.contains("route"))
    a.route = j["route"].get<std::vector<ZoneId>>();
  return a;
}

json corridor_to_json(const CorridorLayout& c) {
  json j;
  j["total_length"] = c.total_length;
  json zones = json::array();
  for (const auto& z : c.zones) zones.push_back(zone_to_json(z));
  j["zones"] = zones;
  json apps = json::array();
  for (const auto& a : c.approaches) apps.push_back(approach_to_json(a));
  j["approaches"] = apps;
  json lanes;
  for (const auto& [lane, segs] : c.lane_speeds) {
    json arr = json::array();
    for (const auto& s : segs) arr.push_back({s.start_pos, s.speed});
    lanes[lane] = arr;
  }
  j["lane_speeds"] = lanes;
  return j;
}

CorridorLayout corridor_from_json(const json& j) {
  CorridorLayout c = CorridorLayout::default_layout();
  if (j.contains("total_length")) c.total_length = j["total_length"];
  if (j.contains("zones")) {
    c.zones.clear();
    for (const auto& zj : j["zones"]) c.zones.push_back(zone_from_json(zj));
  }
  if (j.contains("approaches")) {
    c.approaches.clear();
    for (const auto& aj : j["approaches"])
      c.approaches.push_back(approach_from_json(aj));
  }
  if (j.contains("lane_speeds")) {
    c.lane_speeds.clear();
    for (auto it = j["lane_speeds"].begin(); it != j["lane_speeds"].end(); ++it) {
      std::vector<SpeedSegment> segs;
      for (const auto& s : it.value())
        segs.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
      c.lane_speeds[it.key()] = segs;
    }
  }
  return c;
}

json map_to_json(const EfficiencyMap& m) {
  json j;
  j["peak_eff"] = m.peak_eff;
  j["peak_speed_rpm"] = m.peak_speed_rpm;
  j["speed_width_rpm"] = m.speed_width_rpm;
  j["peak_torque_nm"] = m.peak_torque_nm;
  j["torque_width_nm"] = m.torque_width_nm;
  j["max_speed_rpm"] = m.max_speed_rpm;
  j["max_torque_nm"] = m.max_torque_nm;
  j["torque_sign_symmetric"] = m.torque_sign_symmetric;
  return j;
}

EfficiencyMap map_from_json(const json& j, EfficiencyMap m) {
  m.peak_eff = j.value("peak_eff", m.peak_eff);
  m.peak_speed_rpm = j.value("peak_speed_rpm", m.peak_speed_rpm);
  m.speed_width_rpm = j.value("speed_width_rpm", m.speed_width_rpm);
  m.peak_torque_nm = j.value("peak_torque_nm", m.peak_torque_nm);
  m.torque_width_nm = j.value("torque_width_nm", m.torque_width_nm);
  m.max_speed_rpm = j.value("max_speed_rpm", m.max_speed_rpm);
  m.max_torque_nm = j.value("max_torque_nm", m.max_torque_nm);
  m.torque_sign_symmetric = j.value("torque_sign_symmetric", m.torque_sign_symmetric);
  return m;
}

}  // namespace

json to_json(const ScenarioConfig& c) {
  json j;
  j["scenario"] = to_string(c.scenario);
  j["demand"] = to_string(c.demand);
  j["seed"] = c.seed;
  j["dt"] = c.dt;
  j["duration"] = c.duration;
  j["warmup"] = c.warmup;
  j["pt_policy"] = to_string(c.pt_policy);
  j["corridor"] = corridor_to_json(c.corridor);
  j["bounds"] = {{"u_min", c.bounds.u_min},
                 {"u_max", c.bounds.u_max},
                 {"v_min", c.bounds.v_min},
                 {"v_max", c.bounds.v_max}};
  j["gap"] = {{"standstill_gap", c.gap.standstill_gap},
              {"time_headway", c.gap.time_headway}};
  j["driver"] = {{"max_accel", c.driver.max_accel},
                 {"comfort_decel", c.driver.comfort_decel},
                 {"time_headway", c.driver.time_headway},
                 {"min_gap", c.driver.min_gap},
                 {"accel_exponent", c.driver.accel_exponent}};
  j["yield"] = {{"critical_gap", c.yield.critical_gap},
                {"stop_line_offset", c.yield.stop_line_offset}};
  if (c.signal) {
    j["signal"] = {{"zone", c.signal->zone},
                   {"green_s", c.signal->spec.green_s},
                   {"red_s", c.signal->spec.red_s},
                   {"offset_s", c.signal->spec.offset_s}};
  }
  j["coordination"] = {{"h_rear", c.coordination.h_rear},
                       {"h_lat", c.coordination.h_lat},
                       {"slot_retry", c.coordination.slot_retry},
                       {"max_retries", c.coordination.max_retries},
                       {"check_dt", c.coordination.check_dt},
                       {"safety_slack", c.coordination.safety_slack},
                       {"plan_margin", c.coordination.plan_margin},
                       {"handoff_margin", c.coordination.handoff_margin},
                       {"handoff_margin_per_speed",
                        c.coordination.handoff_margin_per_speed}};
  json pt;
  pt["engine"] = map_to_json(c.powertrain.engine);
  pt["motor"] = map_to_json(c.powertrain.motor);
  pt["load"] = {{"mass", c.powertrain.load.mass},
                {"drag_coef", c.powertrain.load.drag_coef},
                {"frontal_area", c.powertrain.load.frontal_area},
                {"rolling_coef", c.powertrain.load.rolling_coef},
                {"air_density", c.powertrain.load.air_density},
                {"wheel_radius", c.powertrain.load.wheel_radius},
                {"driveline_ratio", c.powertrain.load.driveline_ratio}};
  pt["idle_rpm"] = c.powertrain.idle_rpm;
  pt["alpha"] = c.powertrain.alpha;
  pt["fuel_lhv_j_per_kg"] = c.powertrain.fuel_lhv_j_per_kg;
  pt["baseline_motor_only_below_nm"] = c.powertrain.baseline_motor_only_below_nm;
  pt["split_grid_step_nm"] = c.powertrain.split_grid_step_nm;
  pt["table_grids"] = {{"n_eng_step", c.powertrain.table_grids.n_eng_step},
                       {"n_mot_step", c.powertrain.table_grids.n_mot_step},
                       {"t_driver_step", c.powertrain.table_grids.t_driver_step},
                       {"alpha_step", c.powertrain.table_grids.alpha_step}};
  if (c.powertrain.battery_capacity_wh)
    pt["battery_capacity_wh"] = *c.powertrain.battery_capacity_wh;
  j["powertrain"] = pt;
  j["rates"] = {{"light", c.rates.light},
                {"medium", c.rates.medium},
                {"heavy", c.rates.heavy}};
  j["stop_event"] = {{"speed_threshold", c.stop_event.speed_threshold},
                     {"min_duration", c.stop_event.min_duration}};
  j["spawn_gap_margin"] = c.spawn_gap_margin;
  j["log_trajectories"] = c.log_trajectories;
  return j;
}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  if (j.contains("scenario")) c.scenario = scenario_from_string(j["scenario"]);
  if (j.contains("demand")) c.demand = demand_from_string(j["demand"]);
  c.seed = j.value("seed", c.seed);
  c.dt = j.value("dt", c.dt);
  c.duration = j.value("duration", c.duration);
  c.warmup = j.value("warmup", c.warmup);
  if (j.contains("pt_policy")) c.pt_policy = pt_policy_from_string(j["pt_policy"]);
  if (j.contains("corridor")) c.corridor = corridor_from_json(j["corridor"]);
  if (j.contains("bounds")) {
    const auto& b = j["bounds"];
    c.bounds.u_min = b.value("u_min", c.bounds.u_min);
    c.bounds.u_max = b.value("u_max", c.bounds.u_max);
    c.bounds.v_min = b.value("v_min", c.bounds.v_min);
    c.bounds.v_max = b.value("v_max", c.bounds.v_max);
  }
  if (j.contains("gap")) {
    const auto& g = j["gap"];
    c.gap.standstill_gap = g.value("standstill_gap", c.gap.standstill_gap);
    c.gap.time_headway = g.value("time_headway", c.gap.time_headway);
  }
  if (j.contains("driver")) {
    const auto& d = j["driver"];
    c.driver.max_accel = d.value("max_accel", c.driver.max_accel);
    c.driver.comfort_decel = d.value("comfort_decel", c.driver.comfort_decel);
    c.driver.time_headway = d.value("time_headway", c.driver.time_headway);
    c.driver.min_gap = d.value("min_gap", c.driver.min_gap);
    c.driver.accel_exponent = d.value("accel_exponent", c.driver.accel_exponent);
  }
  if (j.contains("yield")) {
    const auto& y = j["yield"];
    c.yield.critical_gap = y.value("critical_gap", c.yield.critical_gap);
    c.yield.stop_line_offset = y.value("stop_line_offset", c.yield.stop_line_offset);
  }
  if (j.contains("signal")) {
    SignalConfig s;
    s.zone = j["signal"].value("zone", 0);
    s.spec.green_s = j["signal"].value("green_s", 30.0);
    s.spec.red_s = j["signal"].value("red_s", 30.0);
    s.spec.offset_s = j["signal"].value("offset_s", 0.0);
    c.signal = s;
  }
  if (j.contains("coordination")) {
    const auto& k = j["coordination"];
    c.coordination.h_rear = k.value("h_rear", c.coordination.h_rear);
    c.coordination.h_lat = k.value("h_lat", c.coordination.h_lat);
    c.coordination.slot_retry = k.value("slot_retry", c.coordination.slot_retry);
    c.coordination.max_retries = k.value("max_retries", c.coordination.max_retries);
    c.coordination.check_dt = k.value("check_dt", c.coordination.check_dt);
    c.coordination.safety_slack =
        k.value("safety_slack", c.coordination.safety_slack);
    c.coordination.plan_margin =
        k.value("plan_margin", c.coordination.plan_margin);
    c.coordination.handoff_margin =
        k.value("handoff_margin", c.coordination.handoff_margin);
    c.coordination.handoff_margin_per_speed = k.value(
        "handoff_margin_per_speed", c.coordination.handoff_margin_per_speed);
  }
  if (j.contains("powertrain")) {
    const auto& p = j["powertrain"];
    if (p.contains("engine")) c.powertrain.engine = map_from_json(p["engine"], c.powertrain.engine);
    if (p.contains("motor")) c.powertrain.motor = map_from_json(p["motor"], c.powertrain.motor);
    if (p.contains("load")) {
      const auto& l = p["load"];
      auto& v = c.powertrain.load;
      v.mass = l.value("mass", v.mass);
      v.drag_coef = l.value("drag_coef", v.drag_coef);
      v.frontal_area = l.value("frontal_area", v.frontal_area);
      v.rolling_coef = l.value("rolling_coef", v.rolling_coef);
      v.air_density = l.value("air_density", v.air_density);
      v.wheel_radius = l.value("wheel_radius", v.wheel_radius);
      v.driveline_ratio = l.value("driveline_ratio", v.driveline_ratio);
    }
    c.powertrain.idle_rpm = p.value("idle_rpm", c.powertrain.idle_rpm);
    c.powertrain.alpha = p.value("alpha", c.powertrain.alpha);
    c.powertrain.fuel_lhv_j_per_kg =
        p.value("fuel_lhv_j_per_kg", c.powertrain.fuel_lhv_j_per_kg);
    c.powertrain.baseline_motor_only_below_nm = p.value(
        "baseline_motor_only_below_nm", c.powertrain.baseline_motor_only_below_nm);
    c.powertrain.split_grid_step_nm =
        p.value("split_grid_step_nm", c.powertrain.split_grid_step_nm);
    if (p.contains("table_grids")) {
      const auto& g = p["table_grids"];
      auto& tg = c.powertrain.table_grids;
      tg.n_eng_step = g.value("n_eng_step", tg.n_eng_step);
      tg.n_mot_step = g.value("n_mot_step", tg.n_mot_step);
      tg.t_driver_step = g.value("t_driver_step", tg.t_driver_step);
      tg.alpha_step = g.value("alpha_step", tg.alpha_step);
    }
    if (p.contains("battery_capacity_wh"))
      c.powertrain.battery_capacity_wh = p["battery_capacity_wh"].get<double>();
  }
  if (j.contains("rates")) {
    const auto& r = j["rates"];
    c.rates.light = r.value("light", c.rates.light);
    c.rates.medium = r.value("medium", c.rates.medium);
    c.rates.heavy = r.value("heavy", c.rates.heavy);
  }
  if (j.contains("stop_event")) {
    const auto& s = j["stop_event"];
    c.stop_event.speed_threshold = s.value("speed_threshold", c.stop_event.speed_threshold);
    c.stop_event.min_duration = s.value("min_duration", c.stop_event.min_duration);
  }
  c.spawn_gap_margin = j.value("spawn_gap_margin", c.spawn_gap_margin);
  c.log_trajectories = j.value("log_trajectories", c.log_trajectories);
  return c;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

void save_config_file(const ScenarioConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << to_json(c).dump(2) << '\n';
}

bool comparable_configs(const ScenarioConfig& a, const ScenarioConfig& b) {
  if (a.demand != b.demand) return false;
  json ja = to_json(a), jb = to_json(b);
  for (const char* k : {"scenario", "seed", "pt_policy", "log_trajectories"}) {
    ja.erase(k);
    jb.erase(k);
  }
  return ja == jb;
}

}  // namespace cavsim
