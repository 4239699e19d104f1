#include "cavsim/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cavsim {
namespace {

constexpr double kFar = std::numeric_limits<double>::infinity();

Trajectory hold_trajectory(double t0, double p0, double v0, double v_hold,
                           double decel, double horizon) {
  Trajectory traj;
  double t = t0, p = p0, v = v0;
  if (v0 > v_hold + 1e-9) {
    const double dur = (v0 - v_hold) / decel;
    auto seg = TrajectorySegment::from_control(t, t + dur, p, v, 0.0, -decel);
    traj.append(seg);
    t += dur;
    p = seg.position(t);
    v = v_hold;
  }
  if (horizon > t) {
    traj.append(TrajectorySegment::cruise(t, horizon, p, v));
  }
  return traj;
}

/// Slack-arc profile for slots later than the boundary-value solution can
/// absorb without stalling: brake comfortably to a cruise speed, ride it,
/// then accelerate to reach the entry exactly on time at v_exit. Keeping
/// the exit speed floored preserves zone throughput; collapsing arrival
/// speeds would spiral the queue. Empty when even crawling cannot burn
/// enough time.
std::optional<Trajectory> slack_arc_profile(double t0, double p0, double v0,
                                            double p_target, double t_target,
                                            double v_exit, double accel,
                                            double v_crawl_floor) {
  const double dist = p_target - p0;
  const double horizon = t_target - t0;
  if (dist <= 0.0 || horizon <= 0.0) return std::nullopt;
  const double lo_floor = std::max(v_crawl_floor, 0.3);
  double hi = std::min(v0, v_exit);
  if (hi <= lo_floor + 1e-9) return std::nullopt;

  auto arrival_time = [&](double v_c) {
    const double t1 = (v0 - v_c) / accel;
    const double d1 = (v0 * v0 - v_c * v_c) / (2.0 * accel);
    const double t3 = (v_exit - v_c) / accel;
    const double d3 = (v_exit * v_exit - v_c * v_c) / (2.0 * accel);
    if (d1 + d3 > dist) return -1.0;
    return t1 + t3 + (dist - d1 - d3) / v_c;
  };

  if (arrival_time(hi) > horizon) return std::nullopt;  // slot not late enough
  const double slowest = arrival_time(lo_floor);
  if (slowest >= 0.0 && slowest < horizon) return std::nullopt;  // too late

  double lo = lo_floor;
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double at = arrival_time(mid);
    if (at < 0.0 || at > horizon)
      lo = mid;
    else
      hi = mid;
  }
  const double v_c = hi;
  if (std::abs(arrival_time(v_c) - horizon) > 0.05) return std::nullopt;

  Trajectory traj;
  double t = t0, p = p0;
  if (v0 - v_c > 1e-6) {
    const double dur = (v0 - v_c) / accel;
    const auto seg = TrajectorySegment::from_control(t, t + dur, p, v0, 0.0, -accel);
    traj.append(seg);
    t += dur;
    p = seg.position(t);
  }
  const double t3 = (v_exit - v_c) / accel;
  const double d3 = (v_exit * v_exit - v_c * v_c) / (2.0 * accel);
  const double cruise_end = t_target - t3;
  if (cruise_end > t + 1e-9) {
    traj.append(TrajectorySegment::cruise(t, cruise_end, p, v_c));
    t = cruise_end;
    p = p_target - d3;
  }
  if (t3 > 1e-9) {
    traj.append(TrajectorySegment::from_control(t, t_target, p, v_c, 0.0, accel));
  }
  return traj;
}

}  // namespace

std::optional<double> CrossingSchedule::time_at(ZoneId z) const {
  for (const auto& st : zone_times)
    if (st.zone == z) return st.time;
  return std::nullopt;
}

Coordinator::Coordinator(const CorridorLayout* layout, CoordinationMode mode,
                         CoordinationParams params, ControlBounds bounds,
                         SafetyGapModel gap)
    : layout_(layout),
      mode_(mode),
      params_(std::move(params)),
      bounds_(bounds),
      gap_(gap) {
  if (!layout_) throw std::invalid_argument("Coordinator: null layout");
  for (const auto& z : layout_->zones) queues_[z.id] = ZoneQueue{z.id, {}};
}

VehicleId Coordinator::assign_identity(const ArrivalEvent& event) {
  const std::string key = event.key();
  if (registrations_.count(key))
    throw std::invalid_argument("Coordinator: duplicate registration " + key);
  const VehicleId id = next_id_++;
  registrations_[key] = id;
  VehicleRecord rec;
  rec.approach = event.lane;
  rec.t0 = event.time;
  auto it = last_on_approach_.find(event.lane);
  rec.approach_pred = (it == last_on_approach_.end()) ? 0 : it->second;
  last_on_approach_[event.lane] = id;
  records_[id] = rec;
  return id;
}

double Coordinator::queue_separation(const Zone& zone,
                                     const std::string& path) const {
  auto it = queues_.find(zone.id);
  if (it == queues_.end()) return -kFar;
  double bound = -kFar;
  for (const auto& e : it->second.entries) {
    const double h = layout_->conflicting(zone, path, e.path) ? params_.h_lat
                                                              : params_.h_rear;
    bound = std::max(bound, e.crossing_time + h);
  }
  return bound;
}

double Coordinator::schedule_isolated(const Zone& zone, const std::string& path,
                                      double t_z0, double dist_to_entry,
                                      double v0, double extra_delay) const {
  if (dist_to_entry <= 0.0)
    throw std::invalid_argument("schedule_isolated: vehicle already past the zone entry");
  double free_flow_dur = dist_to_entry / zone.desired_speed;
  if (v0 < zone.desired_speed) {
    // Entering below the posted speed: the free-flow target follows a
    // comfortable acceleration to the zone speed instead of demanding a
    // sprint above it.
    const double accel = 1.0;
    const double t_acc = (zone.desired_speed - v0) / accel;
    const double d_acc =
        (zone.desired_speed * zone.desired_speed - v0 * v0) / (2.0 * accel);
    double comfort;
    if (d_acc >= dist_to_entry) {
      comfort = (std::sqrt(v0 * v0 + 2.0 * accel * dist_to_entry) - v0) / accel;
    } else {
      comfort = t_acc + (dist_to_entry - d_acc) / zone.desired_speed;
    }
    free_flow_dur = std::max(free_flow_dur, comfort);
  }
  const double free_flow = t_z0 + free_flow_dur;
  const double kinematic = t_z0 + dist_to_entry / bounds_.v_max;
  const double sep = queue_separation(zone, path);
  return std::max({free_flow, kinematic, sep}) + extra_delay;
}

namespace {

// Earliest comfortable leg time: hold the faster end of the leg, with one
// gentle 1 m/s^2 ramp landing on the zone speed at the zone entry.
double comfort_leg_time(double v_from, double v_to, double dist) {
  const double accel = 1.0;
  v_from = std::max(v_from, 0.5);
  v_to = std::max(v_to, 0.5);
  const double dv = std::abs(v_to - v_from);
  if (dv < 1e-9) return dist / v_to;
  const double t_ramp = dv / accel;
  const double d_ramp = std::abs(v_to * v_to - v_from * v_from) / (2.0 * accel);
  if (d_ramp >= dist) {
    const double sign = v_to > v_from ? 1.0 : -1.0;
    const double v_sq = v_from * v_from + sign * 2.0 * accel * dist;
    if (v_sq <= 0.0) return dist / v_to;
    return (std::sqrt(v_sq) - v_from) / (sign * accel);
  }
  const double v_cruise = std::max(v_from, v_to);
  return t_ramp + (dist - d_ramp) / v_cruise;
}

// Slack factor on nominal times of speed-changing legs: a uniform cushion
// absorbs most queue separations, so the fleet rides near-identical
// profiles. Constant-speed legs keep the exact free-flow time.
double nominal_slack(double v_from, double v_to) {
  return std::abs(v_from - v_to) > 0.5 ? 1.4 : 1.0;
}

}  // namespace

CrossingSchedule Coordinator::schedule_corridor(VehicleId id,
                                                const Approach& approach,
                                                double t0, double v0,
                                                double entry_delay) const {
  CrossingSchedule sched;
  sched.vehicle = id;
  double t_cursor = t0;
  double p_cursor = 0.0;
  double v_cursor = v0;
  bool first = true;
  for (ZoneId zid : approach.route) {
    const Zone& z = layout_->zone(zid);
    const double leg = z.entry_pos - p_cursor;
    if (leg <= 0.0)
      throw std::invalid_argument("schedule_corridor: route positions not increasing");
    const std::string path = layout_->path_label(approach, z);
    const double nominal =
        t_cursor +
        nominal_slack(v_cursor, z.desired_speed) *
            comfort_leg_time(v_cursor, z.desired_speed, leg) +
        (first ? entry_delay : 0.0);
    const double kinematic = t_cursor + leg / bounds_.v_max;
    // The retry delay also pushes separation-bound zones, otherwise a
    // retry cannot move the binding constraint at all.
    const double sep = queue_separation(z, path) + entry_delay;
    const double t_z = std::max({nominal, kinematic, sep});
    sched.zone_times.push_back({zid, t_z});
    t_cursor = t_z;
    p_cursor = z.entry_pos;
    v_cursor = z.desired_speed;
    first = false;
  }
  if (!sched.zone_times.empty())
    sched.final_zone_time = sched.zone_times.back().time;
  return sched;
}

double Coordinator::scheduled_join_time(VehicleId id) const {
  auto rec = records_.find(id);
  if (rec == records_.end()) return kFar;
  const Approach& app = layout_->approach(rec->second.approach);
  if (app.join_pos <= 0.0) return rec->second.t0;
  auto plan = plans_.find(id);
  if (plan == plans_.end() || plan->second.held) return kFar;
  for (const auto& z : layout_->zones) {
    if (std::abs(z.entry_pos - app.join_pos) < 1e-9) {
      if (auto t = plan->second.schedule.time_at(z.id)) return *t;
    }
  }
  return kFar;
}

Trajectory Coordinator::leader_check_trajectory(VehicleId leader,
                                                double horizon) const {
  auto it = plans_.find(leader);
  if (it == plans_.end() || it->second.trajectory.empty()) return {};
  Trajectory traj = it->second.trajectory;
  if (traj.end_time() < horizon) {
    // Beyond its planned horizon the leader is modeled as cruising at the
    // slower of its terminal speed and the local posted speed: a lower
    // bound of its car-following continuation, hence conservative for any
    // follower checked against it.
    const double t_end = traj.end_time();
    const double p_end = traj.position(t_end);
    double v_ext = std::max(0.0, traj.speed(t_end));
    if (mode_ == CoordinationMode::isolated) {
      const auto rec = records_.find(leader);
      if (rec != records_.end()) {
        const Approach& app = layout_->approach(rec->second.approach);
        const std::string lane = layout_->lane_at(app, p_end);
        v_ext = std::min(v_ext, layout_->desired_speed_at(lane, p_end));
      }
    }
    if (v_ext < 1e-3) v_ext = 0.0;
    if (horizon > t_end)
      traj.append(TrajectorySegment::cruise(t_end, horizon, p_end, v_ext));
  }
  return traj;
}

bool Coordinator::corridor_plan_safe(VehicleId id, const Approach& approach,
                                     double t0,
                                     const CrossingSchedule& schedule,
                                     const Trajectory& traj) const {
  const auto& rec = records_.at(id);

  double my_join = t0;
  if (approach.join_pos > 0.0) {
    my_join = kFar;
    for (const auto& z : layout_->zones)
      if (std::abs(z.entry_pos - approach.join_pos) < 1e-9)
        if (auto t = schedule.time_at(z.id)) my_join = *t;
  }

  std::vector<VehicleId> leaders;
  if (rec.approach_pred != 0) leaders.push_back(rec.approach_pred);
  if (last_scheduled_ != 0 && last_scheduled_ != rec.approach_pred &&
      last_scheduled_ != id)
    leaders.push_back(last_scheduled_);

  const double horizon = traj.end_time();
  for (VehicleId leader : leaders) {
    const Trajectory lead = leader_check_trajectory(leader, horizon);
    if (lead.empty()) continue;
    const auto& lrec = records_.at(leader);
    const bool same_approach = lrec.approach == rec.approach;
    const double lead_join = scheduled_join_time(leader);

    std::vector<std::pair<double, double>> windows;
    if (same_approach) {
      if (approach.join_pos <= 0.0) {
        windows.push_back({t0, kFar});
      } else {
        windows.push_back({t0, lead_join});       // both on the approach lane
        windows.push_back({my_join, kFar});       // both merged onto main
      }
    } else {
      windows.push_back({std::max(my_join, lead_join), kFar});
    }
    for (auto [w0, w1] : windows) {
      if (!(w0 < w1) || w0 == kFar) continue;
      const auto report = check_rear_end_safety_window(
          lead, traj, gap_, params_.check_dt, w0, std::min(w1, horizon),
          -params_.plan_margin);
      if (report.comparable && !report.safe()) {
        return false;
      }
    }
  }
  return true;
}

void Coordinator::commit_schedule(VehicleId id, const std::string& approach,
                                  const CrossingSchedule& schedule) {
  const Approach& app = layout_->approach(approach);
  for (const auto& st : schedule.zone_times) {
    const Zone& z = layout_->zone(st.zone);
    queues_[st.zone].entries.push_back(
        {id, st.time, layout_->path_label(app, z)});
  }
  last_scheduled_ = id;
}

const VehiclePlan& Coordinator::plan_vehicle_corridor(
    VehicleId id, const std::string& approach_name, double t0, double v0) {
  const Approach& approach = layout_->approach(approach_name);
  if (!records_.count(id))
    throw std::logic_error("plan_vehicle_corridor: identity not assigned");

  VehiclePlan plan;
  plan.id = id;
  bool v_min_blocked = false;

  for (int attempt = 0; attempt <= params_.max_retries; ++attempt) {
    const double delay = attempt * params_.slot_retry;
    CrossingSchedule sched = schedule_corridor(id, approach, t0, v0, delay);

    // Build the chain leg by leg; a separation-delayed leg whose
    // minimum-effort profile would stall gets the slack arc instead
    // (brake, cruise, land on the waypoint at its speed).
    Trajectory traj;
    bool bounds_blocked = false;
    {
      double p_cur = 0.0, v_cur = v0, t_cur = t0;
      for (const auto& st : sched.zone_times) {
        const Zone& z = layout_->zone(st.zone);
        BoundaryConditions bc;
        bc.t0 = t_cur;
        bc.tf = st.time;
        bc.p0 = p_cur;
        bc.pf = z.entry_pos;
        bc.v0 = v_cur;
        bc.vf = z.desired_speed;
        if (bc.horizon() < kMinHorizon + 0.01) {
          bounds_blocked = true;
          break;
        }
        const OcpSolution sol = solve_fixed_terminal_speed(bc);
        const auto flags = check_feasibility(sol, bounds_);
        if (flags.feasible()) {
          traj.append(sol.segment);
        } else if (!flags.v_min_ok) {
          auto slack = slack_arc_profile(t_cur, p_cur, v_cur, z.entry_pos,
                                         st.time, z.desired_speed, 1.5,
                                         std::max(bounds_.v_min, 0.5));
          if (!slack) {
            slack = slack_arc_profile(t_cur, p_cur, v_cur, z.entry_pos,
                                      st.time, z.desired_speed,
                                      std::min(2.5, -bounds_.u_min),
                                      std::max(bounds_.v_min, 0.5));
          }
          if (!slack) {
            v_min_blocked = true;
            break;
          }
          for (const auto& seg : slack->segments()) traj.append(seg);
        } else {
          bounds_blocked = true;
          break;
        }
        p_cur = z.entry_pos;
        v_cur = z.desired_speed;
        t_cur = st.time;
      }
    }
    if (v_min_blocked) break;
    if (bounds_blocked) continue;

    // Cruise out of the last zone to the corridor end.
    const auto& last = traj.segments().back();
    const double v_exit = std::max(0.5, traj.speed(last.t1));
    const double tail =
        (layout_->total_length - traj.position(last.t1)) / v_exit + 5.0;
    traj.append(TrajectorySegment::cruise(last.t1, last.t1 + tail,
                                          traj.position(last.t1), v_exit));

    if (!corridor_plan_safe(id, approach, t0, sched, traj)) continue;

    plan.schedule = sched;
    plan.trajectory = std::move(traj);
    plan.retries = attempt;
    commit_schedule(id, approach_name, sched);
    plans_[id] = std::move(plan);
    return plans_[id];
  }

  // Slot search exhausted (or the vehicle cannot dawdle enough without
  // stalling): hold at v_min and flag. Not committed to the queues.
  plan.held = true;
  plan.retries = params_.max_retries;
  plan.trajectory = hold_trajectory(t0, 0.0, v0, std::max(bounds_.v_min, 0.0),
                                    std::max(0.5, -bounds_.u_min / 2.0),
                                    t0 + 3600.0);
  plan.schedule.vehicle = id;
  plans_[id] = std::move(plan);
  return plans_[id];
}

const VehiclePlan& Coordinator::plan_vehicle_isolated(
    VehicleId id, const std::string& approach_name, ZoneId zone_id,
    double t_now, double p_now, double v_now) {
  const Approach& approach = layout_->approach(approach_name);
  const Zone& zone = layout_->zone(zone_id);
  if (!records_.count(id))
    throw std::logic_error("plan_vehicle_isolated: identity not assigned");
  const std::string path = layout_->path_label(approach, zone);
  const double dist = zone.entry_pos - p_now;

  VehiclePlan plan;
  plan.id = id;
  bool v_min_blocked = false;

  // A vehicle re-planning after a guard deviation keeps its committed
  // queue position and aims for its own slot again; only first-time
  // planning appends to the queue.
  VehicleId queue_pred = 0;
  std::string queue_pred_path;
  double queue_pred_time = 0.0;
  bool resume = false;
  double resume_slot = 0.0;
  {
    const auto& entries = queues_[zone_id].entries;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].vehicle == id) {
        resume = true;
        resume_slot = entries[i].crossing_time;
        if (i > 0) {
          queue_pred = entries[i - 1].vehicle;
          queue_pred_path = entries[i - 1].path;
          queue_pred_time = entries[i - 1].crossing_time;
        }
        break;
      }
    }
    if (!resume && !entries.empty()) {
      queue_pred = entries.back().vehicle;
      queue_pred_path = entries.back().path;
      queue_pred_time = entries.back().crossing_time;
    }
  }
  const VehicleId approach_pred = records_.at(id).approach_pred;
  // A conflicting-path predecessor becomes this vehicle's same-lane leader
  // once it crosses the entry, provided the vehicle already drives on the
  // main carriageway (a ramp approach stays on its own lane until it
  // crosses, so only the hand-off instant matters there).
  const bool on_main_lane = layout_->lane_at(approach, p_now) == "main";

  const int max_attempts = resume ? 0 : params_.max_retries;
  for (int attempt = 0; attempt <= max_attempts; ++attempt) {
    const double slot = resume ? resume_slot
                               : schedule_isolated(zone, path, t_now, dist,
                                                   v_now,
                                                   attempt * params_.slot_retry);
    if (slot < t_now + kMinHorizon + 0.01) break;
    BoundaryConditions bc;
    bc.t0 = t_now;
    bc.tf = slot;
    bc.p0 = p_now;
    bc.pf = zone.entry_pos;
    bc.v0 = v_now;
    // Hand-off speed window: never above the posted zone speed, never
    // below half of it (collapsing arrival speeds starves the zone and
    // spirals the queue).
    const double v_exit_floor = 0.5 * zone.desired_speed;
    OcpSolution sol = solve_free_terminal_speed(bc);
    const double v_free = sol.segment.speed(slot);
    if (v_free > zone.desired_speed) {
      bc.vf = zone.desired_speed;
      sol = solve_fixed_terminal_speed(bc);
    } else if (v_free < v_exit_floor) {
      bc.vf = v_exit_floor;
      sol = solve_fixed_terminal_speed(bc);
    }
    Trajectory traj;
    const auto flags = check_feasibility(sol, bounds_);
    if (!flags.v_min_ok) {
      // The slot is later than the boundary-value solution can absorb
      // without stalling; switch to the slack arc.
      const double v_exit_arc =
          std::min(std::max(v_exit_floor, bounds_.v_min), v_now);
      auto slack = slack_arc_profile(t_now, p_now, v_now, zone.entry_pos, slot,
                                     v_exit_arc, 1.5,
                                     std::max(bounds_.v_min, 0.5));
      if (!slack) {
        // Comfortable braking cannot reach crawl speed within the
        // distance; try the harder tier before giving up.
        slack = slack_arc_profile(t_now, p_now, v_now, zone.entry_pos, slot,
                                  v_exit_arc, std::min(2.5, -bounds_.u_min),
                                  std::max(bounds_.v_min, 0.5));
      }
      if (!slack) {
        v_min_blocked = true;
        break;
      }
      traj = *slack;
    } else if (!flags.feasible()) {
      continue;
    } else {
      traj.append(sol.segment);
    }
    const double v_f = traj.speed(slot);
    // Zone traversal tail: ease up to the posted zone speed and ride it to
    // the zone exit, so the passage stays under the plan (and its guard)
    // instead of handing a residual closing speed straight to the
    // car-following layer.
    {
      double t_c = slot, p_c = zone.entry_pos, v_c = std::max(0.0, v_f);
      if (v_c < zone.desired_speed - 1e-9 && v_c >= 0.0) {
        const double ramp_up = 1.5;
        const double dur = (zone.desired_speed - v_c) / ramp_up;
        const auto seg = TrajectorySegment::from_control(t_c, t_c + dur, p_c,
                                                         v_c, 0.0, ramp_up);
        traj.append(seg);
        t_c += dur;
        p_c = seg.position(t_c);
        v_c = zone.desired_speed;
      }
      const double p_exit = zone.entry_pos + std::max(zone.length, 5.0) + 2.0;
      if (p_c < p_exit && v_c > 0.1) {
        traj.append(TrajectorySegment::cruise(
            t_c, t_c + (p_exit - p_c) / v_c, p_c, v_c));
      }
    }
    const double horizon = traj.end_time() + 30.0;

    bool ok = true;
    auto check_leader = [&](VehicleId leader, double window_start) {
      if (leader == 0 || leader == id) return;
      const Trajectory lead = leader_check_trajectory(leader, horizon);
      Trajectory lead_traj = lead;
      if (lead_traj.empty()) {
        // Leader already crossed and its plan is gone: rebuild from the
        // realized crossing state.
        auto cross = crossings_.find({leader, zone_id});
        if (cross == crossings_.end()) return;
        const double v_ext =
            std::min(cross->second.second, zone.desired_speed);
        if (cross->second.first >= horizon) return;
        lead_traj.append(TrajectorySegment::cruise(
            cross->second.first, horizon, zone.entry_pos, std::max(0.0, v_ext)));
      }
      if (window_start < traj.end_time()) {
        const auto report = check_rear_end_safety_window(
            lead_traj, traj, gap_, params_.check_dt, std::max(t_now, window_start),
            traj.end_time(), -params_.plan_margin);
        if (report.comparable && !report.safe()) {
          // Margin deficits inherited from the hand-over state cannot be
          // fixed by any slot choice; the runtime audit owns that window.
          // The slot search answers only for samples past the grace period.
          for (const auto& v : report.violations) {
            if (v.t >= t_now + 1.0) {
              ok = false;
              break;
            }
          }
        }
      }
      if (!ok) return;
      // Hand-off spacing at the zone entry: safe gap plus braking slack
      // for the residual closing speed once car-following resumes.
      if (lead_traj.end_time() >= slot && lead_traj.start_time() <= slot) {
        const double lead_pos = lead_traj.position(slot);
        const double lead_v = std::max(0.0, lead_traj.speed(slot));
        const double closing = std::max(0.0, v_f - lead_v);
        const double need = gap_required(std::max(0.0, v_f), gap_) +
                            params_.handoff_margin +
                            params_.handoff_margin_per_speed * v_f +
                            closing * closing / (2.0 * 2.0);
        if (lead_pos - zone.entry_pos < need) ok = false;
      }
    };

    if (layout_->conflicting(zone, path, queue_pred_path)) {
      // Shared-lane window opens at the predecessor's crossing (or never,
      // for a ramp approach still on its own lane).
      check_leader(queue_pred,
                   on_main_lane ? queue_pred_time : horizon + 1.0);
    } else {
      check_leader(queue_pred, t_now);
    }
    if (ok && approach_pred != queue_pred) check_leader(approach_pred, t_now);
    if (!ok) continue;

    plan.schedule.vehicle = id;
    plan.schedule.zone_times = {{zone_id, slot}};
    plan.schedule.final_zone_time = slot;
    plan.trajectory = std::move(traj);
    plan.follow_vehicle = queue_pred;
    plan.retries = attempt;
    if (!resume) {
      queues_[zone_id].entries.push_back({id, slot, path});
      last_scheduled_ = id;
    }
    plans_[id] = std::move(plan);
    return plans_[id];
  }

  (void)v_min_blocked;
  plan.held = true;
  plan.retries = params_.max_retries;
  plan.trajectory = hold_trajectory(t_now, p_now, v_now,
                                    std::max(bounds_.v_min, 0.0),
                                    std::max(0.5, -bounds_.u_min / 2.0),
                                    t_now + 600.0);
  plan.schedule.vehicle = id;
  plans_[id] = std::move(plan);
  return plans_[id];
}

void Coordinator::notify_crossing(VehicleId id, ZoneId zone, double t,
                                  double v) {
  crossings_[{id, zone}] = {t, v};
}

void Coordinator::push_queue_entry(ZoneId zone, const ZoneQueueEntry& entry) {
  auto& q = queues_.at(zone);
  if (!q.entries.empty() && entry.crossing_time <= q.entries.back().crossing_time)
    throw std::invalid_argument("push_queue_entry: crossing times must increase");
  q.entries.push_back(entry);
}

std::optional<double> Coordinator::committed_slot(VehicleId id,
                                                  ZoneId zone) const {
  auto it = queues_.find(zone);
  if (it == queues_.end()) return std::nullopt;
  for (const auto& e : it->second.entries)
    if (e.vehicle == id) return e.crossing_time;
  return std::nullopt;
}

const VehiclePlan* Coordinator::plan_of(VehicleId id) const {
  auto it = plans_.find(id);
  return it == plans_.end() ? nullptr : &it->second;
}

void Coordinator::dump_schedule_csv(std::ostream& out) const {
  out << "vehicle,zone,assigned_time\n";
  for (const auto& [zid, q] : queues_) {
    for (const auto& e : q.entries)
      out << e.vehicle << ',' << zid << ',' << e.crossing_time << '\n';
  }
}

}  // namespace cavsim
