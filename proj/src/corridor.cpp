#include "cavsim/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cavsim {

void ControlBounds::validate() const {
  if (!(u_min < 0.0 && 0.0 < u_max))
    throw std::invalid_argument("ControlBounds: require u_min < 0 < u_max");
  if (!(0.0 <= v_min && v_min < v_max))
    throw std::invalid_argument("ControlBounds: require 0 <= v_min < v_max");
}

void SafetyGapModel::validate() const {
  if (standstill_gap < 0.0)
    throw std::invalid_argument("SafetyGapModel: standstill_gap < 0");
  if (time_headway <= 0.0)
    throw std::invalid_argument("SafetyGapModel: time_headway <= 0");
}

double gap_required(double speed, const SafetyGapModel& model) {
  if (speed < 0.0) throw std::domain_error("gap_required: negative speed");
  return model.standstill_gap + model.time_headway * speed;
}

void CorridorLayout::validate() const {
  if (total_length <= 0.0)
    throw std::invalid_argument("CorridorLayout: total_length <= 0");
  double prev = -1.0;
  for (const auto& z : zones) {
    if (z.entry_pos <= prev)
      throw std::invalid_argument("CorridorLayout: zone entries not increasing");
    if (z.control_zone_start >= z.entry_pos)
      throw std::invalid_argument("CorridorLayout: control zone must start upstream of the zone entry");
    if (z.entry_pos < 0.0 || z.entry_pos > total_length || z.control_zone_start < 0.0)
      throw std::invalid_argument("CorridorLayout: zone positions outside corridor");
    if (z.desired_speed <= 0.0)
      throw std::invalid_argument("CorridorLayout: zone desired speed <= 0");
    prev = z.entry_pos;
  }
  for (const auto& a : approaches) {
    if (a.spawn_speed <= 0.0)
      throw std::invalid_argument("CorridorLayout: approach spawn speed <= 0");
    for (ZoneId zid : a.route) zone(zid);  // must resolve
    if (lane_speeds.find(a.lane) == lane_speeds.end() &&
        lane_speeds.find("main") == lane_speeds.end())
      throw std::invalid_argument("CorridorLayout: no speed profile for lane " + a.lane);
  }
}

const Zone& CorridorLayout::zone(ZoneId id) const {
  for (const auto& z : zones)
    if (z.id == id) return z;
  throw std::out_of_range("CorridorLayout: unknown zone id " + std::to_string(id));
}

const Approach& CorridorLayout::approach(const std::string& name) const {
  for (const auto& a : approaches)
    if (a.name == name) return a;
  throw std::out_of_range("CorridorLayout: unknown approach " + name);
}

std::string CorridorLayout::lane_at(const Approach& approach, double pos) const {
  if (approach.join_pos > 0.0 && pos < approach.join_pos) return approach.lane;
  return "main";
}

std::string CorridorLayout::path_label(const Approach& approach, const Zone& z) const {
  if (approach.join_pos > 0.0 && z.entry_pos <= approach.join_pos) return approach.lane;
  return "main";
}

bool CorridorLayout::conflicting(const Zone& z, const std::string& path_a,
                                 const std::string& path_b) const {
  for (const auto& [a, b] : z.conflict_pairs) {
    if ((a == path_a && b == path_b) || (a == path_b && b == path_a)) return true;
  }
  return false;
}

double CorridorLayout::desired_speed_at(const std::string& lane, double pos) const {
  auto it = lane_speeds.find(lane);
  if (it == lane_speeds.end()) it = lane_speeds.find("main");
  if (it == lane_speeds.end() || it->second.empty())
    throw std::out_of_range("CorridorLayout: no speed profile for lane " + lane);
  double speed = it->second.front().speed;
  for (const auto& seg : it->second) {
    if (pos >= seg.start_pos) speed = seg.speed;
  }
  return speed;
}

CorridorLayout CorridorLayout::default_layout() {
  CorridorLayout c;
  c.total_length = 1300.0;

  Zone merge;
  merge.id = 1;
  merge.name = "merge";
  merge.entry_pos = 400.0;
  merge.length = 20.0;
  merge.control_zone_start = 250.0;
  merge.desired_speed = 17.0;
  merge.conflict_pairs = {{"main", "ramp"}};

  Zone srz;
  srz.id = 2;
  srz.name = "srz";
  srz.entry_pos = 800.0;
  srz.length = 125.0;
  srz.control_zone_start = 650.0;
  srz.desired_speed = 8.0;

  Zone roundabout;
  roundabout.id = 3;
  roundabout.name = "roundabout";
  roundabout.entry_pos = 1200.0;
  roundabout.length = 30.0;
  roundabout.control_zone_start = 1050.0;
  roundabout.desired_speed = 11.0;

  c.zones = {merge, srz, roundabout};

  Approach main;
  main.name = "main";
  main.lane = "main";
  main.join_pos = 0.0;
  main.spawn_speed = 17.0;
  main.demand_fraction = 1.0;
  main.route = {1, 2, 3};

  Approach ramp;
  ramp.name = "ramp";
  ramp.lane = "ramp";
  ramp.join_pos = 400.0;
  ramp.spawn_speed = 17.0;
  ramp.demand_fraction = 0.3;
  ramp.route = {1, 2, 3};

  c.approaches = {main, ramp};

  c.lane_speeds["main"] = {{0.0, 17.0}, {800.0, 8.0}, {925.0, 11.0}};
  c.lane_speeds["ramp"] = {{0.0, 17.0}};
  return c;
}

}  // namespace cavsim
