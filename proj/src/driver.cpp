#include "cavsim/driver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cavsim {

void DriverParams::validate() const {
  if (desired_speed <= 0.0 || max_accel <= 0.0 || comfort_decel <= 0.0 ||
      time_headway <= 0.0 || min_gap <= 0.0 || accel_exponent <= 0.0)
    throw std::invalid_argument("DriverParams: all parameters must be positive");
}

double follow_accel(double speed, const std::optional<LeaderObservation>& leader,
                    const DriverParams& params, const ControlBounds& bounds) {
  if (speed < 0.0) throw std::domain_error("follow_accel: negative speed");
  double u = params.max_accel *
             (1.0 - std::pow(speed / params.desired_speed, params.accel_exponent));
  if (leader) {
    if (leader->gap <= 0.0) return bounds.u_min;  // emergency
    const double dv = speed - leader->speed;
    const double s_star =
        params.min_gap + speed * params.time_headway +
        speed * dv / (2.0 * std::sqrt(params.max_accel * params.comfort_decel));
    const double ratio = s_star / leader->gap;
    u -= params.max_accel * ratio * ratio;
  }
  return std::clamp(u, bounds.u_min, bounds.u_max);
}

double anticipated_desired_speed(double pos, double current_segment_speed,
                                 std::span<const SpeedSegment> profile,
                                 double comfort_decel) {
  double v0 = current_segment_speed;
  for (const auto& seg : profile) {
    const double dist = seg.start_pos - pos;
    if (dist <= 0.0) continue;
    // Speed from which seg.speed is reachable over dist at comfort_decel.
    const double reachable =
        std::sqrt(seg.speed * seg.speed + 2.0 * comfort_decel * dist);
    v0 = std::min(v0, reachable);
  }
  return v0;
}

YieldDecision yield_decision(double own_eta,
                             std::span<const double> conflicting_etas,
                             const YieldRule& rule) {
  for (double eta : conflicting_etas) {
    if (eta < own_eta) continue;  // already cleared the zone entry
    if (eta - own_eta < rule.critical_gap) return YieldDecision::stop_at_line;
  }
  return YieldDecision::go;
}

void SignalSpec::validate() const {
  if (green_s <= 0.0 || red_s <= 0.0)
    throw std::invalid_argument("SignalSpec: phases must be positive");
}

SignalPhase signal_phase(double t, const SignalSpec& spec) {
  spec.validate();
  const double cycle = spec.green_s + spec.red_s;
  double phase = std::fmod(t - spec.offset_s, cycle);
  if (phase < 0.0) phase += cycle;
  return phase < spec.green_s ? SignalPhase::green : SignalPhase::red;
}

}  // namespace cavsim
