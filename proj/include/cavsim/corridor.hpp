#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cavsim {

using VehicleId = int;
using ZoneId = int;

/// Admissible acceleration and speed range shared by every vehicle.
struct ControlBounds {
  double u_min = -3.0;  // m/s^2
  double u_max = 3.0;   // m/s^2
  double v_min = 0.0;   // m/s
  double v_max = 20.0;  // m/s

  void validate() const;
};

/// Rear-end safe-distance model: gap(v) = standstill_gap + time_headway * v.
struct SafetyGapModel {
  double standstill_gap = 2.0;  // m
  double time_headway = 1.2;    // s

  void validate() const;
};

/// Minimum spacing a follower moving at `speed` must keep to its leader.
/// Throws std::domain_error for negative speed.
double gap_required(double speed, const SafetyGapModel& model);

/// A conflict zone (merge, speed-reduction zone, roundabout, ...) with its
/// upstream control zone. Positions are meters along the corridor axis.
struct Zone {
  ZoneId id = 0;
  std::string name;
  double entry_pos = 0.0;
  double length = 0.0;
  double control_zone_start = 0.0;  // < entry_pos
  double desired_speed = 0.0;       // m/s held at the zone entry
  // Pairs of approach path labels that may not occupy the zone together.
  std::vector<std::pair<std::string, std::string>> conflict_pairs;

  double control_zone_length() const { return entry_pos - control_zone_start; }
  bool in_control_zone(double pos) const {
    return pos >= control_zone_start && pos < entry_pos;
  }
  bool in_zone(double pos) const {
    return pos >= entry_pos && pos < entry_pos + length;
  }
};

/// A demand entry point. All approaches share the corridor position axis;
/// an approach with join_pos > 0 runs on its own lane until that position
/// (e.g. an on-ramp joining the mainline at the merge zone).
struct Approach {
  std::string name;
  std::string lane;        // lane id while upstream of join_pos
  double join_pos = 0.0;   // 0 => on the main lane from the start
  double spawn_speed = 17.0;
  double demand_fraction = 1.0;  // multiple of the scenario's mainline rate
  std::vector<ZoneId> route;
};

struct SpeedSegment {
  double start_pos = 0.0;
  double speed = 0.0;
};

struct CorridorLayout {
  double total_length = 1300.0;
  std::vector<Zone> zones;            // entry positions strictly increasing
  std::vector<Approach> approaches;
  // Desired-speed profile per lane, segments ordered by start position.
  std::map<std::string, std::vector<SpeedSegment>> lane_speeds;

  void validate() const;

  const Zone& zone(ZoneId id) const;
  const Approach& approach(const std::string& name) const;

  /// Lane occupied by a vehicle from `approach` at position `pos`.
  std::string lane_at(const Approach& approach, double pos) const;

  /// Path label of `approach` at zone `z` (the lane it uses to reach the
  /// zone entry); determines lateral-conflict relations.
  std::string path_label(const Approach& approach, const Zone& z) const;

  bool conflicting(const Zone& z, const std::string& path_a,
                   const std::string& path_b) const;

  /// Posted desired speed on `lane` at `pos`.
  double desired_speed_at(const std::string& lane, double pos) const;

  /// Three-zone corridor: highway merge, speed-reduction zone, roundabout.
  static CorridorLayout default_layout();
};

/// Kinematic state of one vehicle on its route.
struct VehicleState {
  VehicleId id = 0;
  double position = 0.0;  // m along the corridor axis
  double speed = 0.0;     // m/s
  double accel = 0.0;     // m/s^2, current control input
  int approach_index = 0;
  std::vector<ZoneId> route;
  double entry_time = 0.0;  // s
};

}  // namespace cavsim
