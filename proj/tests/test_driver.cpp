#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cavsim/driver.hpp"

using namespace cavsim;

namespace {

// Independent re-statement of the car-following law for the oracle checks.
double idm_reference(double v, double v0, double gap, double v_lead, double a,
                     double b, double T, double s0, double delta) {
  const double s_star = s0 + v * T + v * (v - v_lead) / (2.0 * std::sqrt(a * b));
  return a * (1.0 - std::pow(v / v0, delta) - (s_star / gap) * (s_star / gap));
}

}  // namespace

TEST_CASE("follow_accel: free-road equilibrium and standstill start") {
  DriverParams p;
  p.desired_speed = 17.0;
  ControlBounds bounds;
  CHECK(follow_accel(17.0, std::nullopt, p, bounds) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(follow_accel(0.0, std::nullopt, p, bounds) ==
        doctest::Approx(p.max_accel).epsilon(1e-12));
}

TEST_CASE("follow_accel matches an independent evaluation of the law") {
  DriverParams p;
  p.desired_speed = 17.0;
  p.max_accel = 1.5;
  p.comfort_decel = 2.0;
  p.time_headway = 1.5;
  p.min_gap = 2.0;
  p.accel_exponent = 4.0;
  ControlBounds bounds;
  const double expected =
      idm_reference(10.0, 17.0, 30.0, 10.0, 1.5, 2.0, 1.5, 2.0, 4.0);
  const double got =
      follow_accel(10.0, LeaderObservation{30.0, 10.0}, p, bounds);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("follow_accel: nonpositive spacing demands emergency braking") {
  DriverParams p;
  ControlBounds bounds;
  CHECK(follow_accel(10.0, LeaderObservation{0.0, 5.0}, p, bounds) ==
        bounds.u_min);
  CHECK(follow_accel(10.0, LeaderObservation{-2.0, 5.0}, p, bounds) ==
        bounds.u_min);
}

TEST_CASE("follow_accel respects the control bounds") {
  DriverParams p;
  p.desired_speed = 10.0;
  ControlBounds bounds;
  // Deep into the leader's buffer: raw law far below u_min, clamped.
  const double u = follow_accel(10.0, LeaderObservation{3.0, 0.0}, p, bounds);
  CHECK(u == bounds.u_min);
}

TEST_CASE("anticipated desired speed brakes ahead of slow segments") {
  const std::vector<SpeedSegment> profile = {{0.0, 17.0}, {800.0, 8.0},
                                             {925.0, 11.0}};
  CHECK(anticipated_desired_speed(0.0, 17.0, profile, 2.0) ==
        doctest::Approx(17.0));
  // Beyond the braking envelope the current segment speed governs.
  CHECK(anticipated_desired_speed(700.0, 17.0, profile, 2.0) ==
        doctest::Approx(17.0));
  // Inside the envelope: sqrt(8^2 + 2*2*dist) with 50 m to the zone.
  const double at_750 = anticipated_desired_speed(750.0, 17.0, profile, 2.0);
  CHECK(at_750 == doctest::Approx(std::sqrt(64.0 + 4.0 * 50.0)).epsilon(1e-12));
  CHECK(anticipated_desired_speed(850.0, 8.0, profile, 2.0) ==
        doctest::Approx(8.0));
}

TEST_CASE("yield decision: empty conflicting stream goes") {
  YieldRule rule{3.5, 3.0};
  CHECK(yield_decision(0.5, {}, rule) == YieldDecision::go);
}

TEST_CASE("yield decision: simultaneous arrival stops") {
  YieldRule rule{3.5, 3.0};
  const std::vector<double> etas = {0.5};
  CHECK(yield_decision(0.5, etas, rule) == YieldDecision::stop_at_line);
}

TEST_CASE("yield decision: 4 s spaced stream accepts the first gap") {
  YieldRule rule{3.5, 3.0};
  // Poised at the line (small own eta); the lead vehicle has just cleared,
  // the next one is 3.8 s out.
  const std::vector<double> etas = {-0.2, 3.8, 7.8};
  CHECK(yield_decision(0.1, etas, rule) == YieldDecision::go);
  // A hair closer and the gap is refused.
  const std::vector<double> tight = {-0.2, 3.5, 7.5};
  CHECK(yield_decision(0.1, tight, rule) == YieldDecision::stop_at_line);
}

TEST_CASE("signal phase: half-open green interval") {
  SignalSpec spec{30.0, 30.0, 0.0};
  CHECK(signal_phase(0.0, spec) == SignalPhase::green);
  CHECK(signal_phase(45.0, spec) == SignalPhase::red);
  CHECK(signal_phase(60.0, spec) == SignalPhase::green);  // cycle boundary
  CHECK(signal_phase(29.999, spec) == SignalPhase::green);
  CHECK(signal_phase(30.0, spec) == SignalPhase::red);
  SignalSpec bad{0.0, 30.0, 0.0};
  CHECK_THROWS_AS(signal_phase(0.0, bad), std::invalid_argument);
}
