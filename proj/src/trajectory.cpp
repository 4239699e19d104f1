#include "cavsim/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cavsim {

TrajectorySegment TrajectorySegment::from_control(double t0, double t1,
                                                  double p0, double v0,
                                                  double a, double b) {
  if (t1 <= t0) throw std::invalid_argument("TrajectorySegment: t1 <= t0");
  TrajectorySegment s;
  s.t0 = t0;
  s.t1 = t1;
  s.c0 = p0;
  s.c1 = v0;
  s.c2 = b / 2.0;
  s.c3 = a / 6.0;
  return s;
}

TrajectorySegment TrajectorySegment::cruise(double t0, double t1, double p0,
                                            double v0) {
  return from_control(t0, t1, p0, v0, 0.0, 0.0);
}

void Trajectory::append(const TrajectorySegment& seg) {
  if (!segments_.empty()) {
    const auto& last = segments_.back();
    if (std::abs(seg.t0 - last.t1) > 1e-9)
      throw std::invalid_argument("Trajectory: segment start time mismatch");
    // Position must be continuous. Speed may step down at a joint when a
    // trajectory serves as a conservative bound (leader extensions);
    // solver-built chains are C1 and checked via max_joint_speed_gap.
    if (std::abs(seg.position(seg.t0) - last.position(last.t1)) > 1e-6)
      throw std::invalid_argument("Trajectory: segment breaks position continuity");
  }
  segments_.push_back(seg);
}

double Trajectory::start_time() const {
  if (segments_.empty()) throw std::logic_error("Trajectory: empty");
  return segments_.front().t0;
}

double Trajectory::end_time() const {
  if (segments_.empty()) throw std::logic_error("Trajectory: empty");
  return segments_.back().t1;
}

const TrajectorySegment& Trajectory::segment_at(double t) const {
  if (segments_.empty()) throw std::logic_error("Trajectory: empty");
  // Few segments per plan; linear scan is fine.
  for (const auto& s : segments_) {
    if (t <= s.t1) return s;
  }
  return segments_.back();
}

double Trajectory::position(double t) const {
  t = std::clamp(t, start_time(), end_time());
  return segment_at(t).position(t);
}

double Trajectory::speed(double t) const {
  t = std::clamp(t, start_time(), end_time());
  return segment_at(t).speed(t);
}

double Trajectory::accel(double t) const {
  t = std::clamp(t, start_time(), end_time());
  return segment_at(t).accel(t);
}

double Trajectory::max_joint_position_gap() const {
  double worst = 0.0;
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    const double tj = segments_[i].t0;
    worst = std::max(worst, std::abs(segments_[i].position(tj) -
                                     segments_[i - 1].position(tj)));
  }
  return worst;
}

double Trajectory::max_joint_speed_gap() const {
  double worst = 0.0;
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    const double tj = segments_[i].t0;
    worst = std::max(worst, std::abs(segments_[i].speed(tj) -
                                     segments_[i - 1].speed(tj)));
  }
  return worst;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path,
                          double dt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,p,v,u\n";
  if (traj.empty()) return;
  const double t0 = traj.start_time();
  const double t1 = traj.end_time();
  for (double t = t0; t <= t1 + 1e-12; t += dt) {
    const double tc = std::min(t, t1);
    out << tc << ',' << traj.position(tc) << ',' << traj.speed(tc) << ','
        << traj.accel(tc) << '\n';
  }
}

SafetyReport check_rear_end_safety_window(const Trajectory& leader,
                                          const Trajectory& follower,
                                          const SafetyGapModel& model,
                                          double dt, double w0, double w1,
                                          double slack) {
  SafetyReport report;
  if (dt <= 0.0) throw std::invalid_argument("check_rear_end_safety: dt <= 0");
  if (leader.empty() || follower.empty() || w1 < w0) {
    report.comparable = false;
    return report;
  }
  const double lo = std::max({w0, leader.start_time(), follower.start_time()});
  const double hi = std::min({w1, leader.end_time(), follower.end_time()});
  if (hi < lo) {
    report.comparable = false;
    return report;
  }
  const int n = static_cast<int>(std::floor((hi - lo) / dt + 1e-9));
  for (int k = 0; k <= n; ++k) {
    const double t = std::min(lo + k * dt, hi);
    const double gap = leader.position(t) - follower.position(t);
    const double required = gap_required(std::max(0.0, follower.speed(t)), model);
    if (gap < required - slack) report.violations.push_back({t, gap, required});
  }
  return report;
}

SafetyReport check_rear_end_safety(const Trajectory& leader,
                                   const Trajectory& follower,
                                   const SafetyGapModel& model, double dt,
                                   double slack) {
  if (leader.empty() || follower.empty()) {
    SafetyReport report;
    report.comparable = false;
    return report;
  }
  return check_rear_end_safety_window(
      leader, follower, model, dt,
      std::max(leader.start_time(), follower.start_time()),
      std::min(leader.end_time(), follower.end_time()), slack);
}

}  // namespace cavsim
