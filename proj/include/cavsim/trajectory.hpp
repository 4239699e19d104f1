#pragma once

#include <string>
#include <vector>

#include "cavsim/corridor.hpp"

namespace cavsim {

/// One polynomial piece of a planned motion. In local time tau = t - t0:
///   p(tau) = c0 + c1 tau + c2 tau^2 + c3 tau^3,
/// so v is quadratic and the control u = p'' is affine in tau.
struct TrajectorySegment {
  double t0 = 0.0;
  double t1 = 0.0;
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;

  double position(double t) const {
    const double tau = t - t0;
    return c0 + tau * (c1 + tau * (c2 + tau * c3));
  }
  double speed(double t) const {
    const double tau = t - t0;
    return c1 + tau * (2.0 * c2 + tau * 3.0 * c3);
  }
  double accel(double t) const {
    const double tau = t - t0;
    return 2.0 * c2 + 6.0 * c3 * tau;
  }
  double duration() const { return t1 - t0; }

  /// Segment driven by the affine control u(tau) = a tau + b.
  static TrajectorySegment from_control(double t0, double t1, double p0,
                                        double v0, double a, double b);
  static TrajectorySegment cruise(double t0, double t1, double p0, double v0);
};

/// Piecewise-polynomial motion, C1 across segment joints.
class Trajectory {
 public:
  Trajectory() = default;

  /// Appends a segment; it must start where (and when) the previous ends.
  void append(const TrajectorySegment& seg);

  bool empty() const { return segments_.empty(); }
  double start_time() const;
  double end_time() const;

  /// Evaluation clamps t into [start_time, end_time].
  double position(double t) const;
  double speed(double t) const;
  double accel(double t) const;

  const std::vector<TrajectorySegment>& segments() const { return segments_; }

  /// Largest position/speed mismatch across interior joints.
  double max_joint_position_gap() const;
  double max_joint_speed_gap() const;

 private:
  const TrajectorySegment& segment_at(double t) const;
  std::vector<TrajectorySegment> segments_;
};

/// Writes t,p,v,u rows sampled every dt over the trajectory domain.
void write_trajectory_csv(const Trajectory& traj, const std::string& path,
                          double dt);

struct SafetyViolation {
  double t = 0.0;
  double gap = 0.0;       // leader position - follower position
  double required = 0.0;  // gap_required(follower speed)
};

struct SafetyReport {
  bool comparable = true;  // false when the time windows do not overlap
  std::vector<SafetyViolation> violations;

  bool safe() const { return violations.empty(); }
};

/// Samples the spacing between leader and follower every dt over their
/// common time window and reports instants where it drops below the
/// required safe gap (less the slack).
SafetyReport check_rear_end_safety(const Trajectory& leader,
                                   const Trajectory& follower,
                                   const SafetyGapModel& model, double dt,
                                   double slack = 1e-6);

/// Same check restricted to an explicit window [w0, w1].
SafetyReport check_rear_end_safety_window(const Trajectory& leader,
                                          const Trajectory& follower,
                                          const SafetyGapModel& model,
                                          double dt, double w0, double w1,
                                          double slack = 1e-6);

}  // namespace cavsim
