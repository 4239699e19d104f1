#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cavsim/corridor.hpp"
#include "cavsim/ocp.hpp"
#include "cavsim/trajectory.hpp"

namespace cavsim {

enum class CoordinationMode { isolated, corridor };

struct CoordinationParams {
  double h_rear = 1.2;      // s between same-path vehicles at a zone entry
  double h_lat = 1.5;       // s between conflicting-path vehicles
  double slot_retry = 0.5;  // s pushed per infeasible attempt
  int max_retries = 20;
  double check_dt = 0.1;    // s, sampling step for plan safety checks
  double safety_slack = 1e-6;
  // Plans must clear the safe gap by this margin so the runtime guard and
  // audit thresholds sit strictly inside what was verified.
  double plan_margin = 0.5;  // m
  // Extra spacing demanded at the hand-off into a zone on top of the safe
  // gap, absorbing the car-following transient downstream of the entry;
  // scales with the hand-off speed (base + per_speed * v).
  double handoff_margin = 1.5;            // m
  double handoff_margin_per_speed = 0.25; // m per m/s
};

struct ArrivalEvent {
  double time = 0.0;
  std::string lane;
  int stream_index = 0;  // per-lane arrival counter

  std::string key() const { return lane + "#" + std::to_string(stream_index); }
};

struct ZoneQueueEntry {
  VehicleId vehicle = 0;
  double crossing_time = 0.0;
  std::string path;
};

struct ZoneQueue {
  ZoneId zone = 0;
  std::vector<ZoneQueueEntry> entries;  // crossing times strictly increasing
};

struct ScheduledTime {
  ZoneId zone = 0;
  double time = 0.0;
};

struct CrossingSchedule {
  VehicleId vehicle = 0;
  std::vector<ScheduledTime> zone_times;  // in route order
  double final_zone_time = 0.0;

  std::optional<double> time_at(ZoneId z) const;
};

struct VehiclePlan {
  VehicleId id = 0;
  CrossingSchedule schedule;
  Trajectory trajectory;
  VehicleId follow_vehicle = 0;  // committed slot predecessor, if any
  int retries = 0;
  bool held = false;  // slot search exhausted; flagged, not dropped
};

/// Infrastructure agent: assigns identities, owns the per-zone crossing
/// queues, and turns slot assignments into planned trajectories. Makes no
/// control decision beyond the published schedule.
class Coordinator {
 public:
  Coordinator(const CorridorLayout* layout, CoordinationMode mode,
              CoordinationParams params, ControlBounds bounds,
              SafetyGapModel gap);

  CoordinationMode mode() const { return mode_; }

  /// Fresh identity for an arrival; re-registering the same event throws.
  VehicleId assign_identity(const ArrivalEvent& event);

  /// Earliest admissible crossing time of `zone` for a vehicle on `path`
  /// that entered the control zone at t_z0 with dist_to_entry still to go
  /// at speed v0: max of the free-flow arrival (at least the comfortable
  /// acceleration profile when entering below the zone speed) and the
  /// separation behind every queued vehicle. Pure; commit happens in
  /// plan_vehicle_isolated.
  double schedule_isolated(const Zone& zone, const std::string& path,
                           double t_z0, double dist_to_entry, double v0,
                           double extra_delay = 0.0) const;

  /// Zone times along the whole route for a corridor-mode arrival at t0:
  /// per zone the max of the free-flow leg arrival, the v_max-limited
  /// earliest arrival, and the queue separations. Pure.
  CrossingSchedule schedule_corridor(VehicleId id, const Approach& approach,
                                     double t0, double v0,
                                     double entry_delay = 0.0) const;

  /// Plans a corridor vehicle end to end: slot search, waypoint chaining,
  /// feasibility and rear-end verification, retrying with later slots.
  /// Commits the schedule and stores the plan.
  const VehiclePlan& plan_vehicle_corridor(VehicleId id,
                                           const std::string& approach,
                                           double t0, double v0);

  /// Plans one control-zone passage for an isolated-mode vehicle from its
  /// current state. Same retry discipline.
  const VehiclePlan& plan_vehicle_isolated(VehicleId id,
                                           const std::string& approach,
                                           ZoneId zone, double t_now,
                                           double p_now, double v_now);

  /// Realized zone crossing feedback; used to model predecessors that have
  /// left their planned horizon.
  void notify_crossing(VehicleId id, ZoneId zone, double t, double v);

  /// Appends a queue entry directly (state restore / tests). Crossing times
  /// per zone must stay strictly increasing.
  void push_queue_entry(ZoneId zone, const ZoneQueueEntry& entry);

  const VehiclePlan* plan_of(VehicleId id) const;
  const std::map<ZoneId, ZoneQueue>& queues() const { return queues_; }

  /// Committed crossing time of `id` at `zone`, if any.
  std::optional<double> committed_slot(VehicleId id, ZoneId zone) const;
  int registered_count() const { return next_id_ - 1; }

  /// vehicle,zone,assigned_time rows for audit.
  void dump_schedule_csv(std::ostream& out) const;

 private:
  struct VehicleRecord {
    std::string approach;
    double t0 = 0.0;
    VehicleId approach_pred = 0;  // previous vehicle on the same approach
  };

  double queue_separation(const Zone& zone, const std::string& path) const;
  void commit_schedule(VehicleId id, const std::string& approach,
                       const CrossingSchedule& schedule);
  Trajectory leader_check_trajectory(VehicleId leader, double horizon) const;
  bool corridor_plan_safe(VehicleId id, const Approach& approach, double t0,
                          const CrossingSchedule& schedule,
                          const Trajectory& traj) const;
  double scheduled_join_time(VehicleId id) const;

  const CorridorLayout* layout_;
  CoordinationMode mode_;
  CoordinationParams params_;
  ControlBounds bounds_;
  SafetyGapModel gap_;

  VehicleId next_id_ = 1;
  std::map<std::string, VehicleId> registrations_;
  std::map<ZoneId, ZoneQueue> queues_;
  std::map<VehicleId, VehicleRecord> records_;
  std::map<VehicleId, VehiclePlan> plans_;
  std::map<std::string, VehicleId> last_on_approach_;
  VehicleId last_scheduled_ = 0;
  // Realized crossings: (vehicle, zone) -> (time, speed).
  std::map<std::pair<VehicleId, ZoneId>, std::pair<double, double>> crossings_;
};

}  // namespace cavsim
