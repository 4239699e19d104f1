#pragma once

#include <optional>
#include <span>

#include "cavsim/corridor.hpp"

namespace cavsim {

/// Intelligent-driver-model parameters for the human-driver baseline.
struct DriverParams {
  double desired_speed = 17.0;   // m/s, set per lane segment by the caller
  double max_accel = 1.5;        // m/s^2
  double comfort_decel = 1.5;    // m/s^2
  double time_headway = 1.8;     // s, kept >= the safety model's headway
  double min_gap = 3.0;          // m
  double accel_exponent = 4.0;

  void validate() const;
};

struct LeaderObservation {
  double gap = 0.0;    // m, leader position - own position
  double speed = 0.0;  // m/s
};

/// IDM acceleration:
///   u = a [1 - (v/v0)^delta - (s*/s)^2],
///   s* = s0 + v T + v dv / (2 sqrt(a b)),
/// clamped into [u_min, u_max]. A nonpositive gap returns u_min (emergency
/// braking); the caller is expected to log it as a safety fault.
double follow_accel(double speed, const std::optional<LeaderObservation>& leader,
                    const DriverParams& params, const ControlBounds& bounds);

/// Desired-speed ceiling that also anticipates slower segments ahead:
/// the driver begins braking early enough to reach each upcoming segment
/// speed at comfort_decel.
double anticipated_desired_speed(double pos, double current_segment_speed,
                                 std::span<const SpeedSegment> profile,
                                 double comfort_decel);

struct YieldRule {
  double critical_gap = 4.0;     // s
  double stop_line_offset = 3.0; // m upstream of the zone entry
};

enum class YieldDecision { go, stop_at_line };

/// Gap acceptance at a conflict zone: go when every conflicting vehicle
/// still heading for the zone arrives at least critical_gap after us.
/// Vehicles whose arrival precedes ours count as cleared (they become
/// ordinary leaders downstream).
YieldDecision yield_decision(double own_eta,
                             std::span<const double> conflicting_etas,
                             const YieldRule& rule);

struct SignalSpec {
  double green_s = 30.0;
  double red_s = 30.0;
  double offset_s = 0.0;

  void validate() const;
};

enum class SignalPhase { green, red };

/// Fixed-time phase; green on [0, green_s) of each cycle (half-open).
SignalPhase signal_phase(double t, const SignalSpec& spec);

}  // namespace cavsim
