#include <doctest.h>

#include <random>

#include "cavsim/corridor.hpp"
#include "cavsim/ocp.hpp"
#include "cavsim/trajectory.hpp"

using namespace cavsim;

TEST_CASE("gap_required matches the affine model") {
  SafetyGapModel m;
  m.standstill_gap = 2.0;
  m.time_headway = 1.2;
  CHECK(gap_required(0.0, m) == doctest::Approx(2.0));
  CHECK(gap_required(17.0, m) == doctest::Approx(22.4).epsilon(1e-12));

  SafetyGapModel proportional{0.0, 1.2};
  CHECK(gap_required(10.0, proportional) == doctest::Approx(12.0));

  CHECK_THROWS_AS(gap_required(-1.0, m), std::domain_error);
}

TEST_CASE("gap_required is monotone in speed") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    SafetyGapModel m;
    m.standstill_gap = (rng() % 1000) / 100.0;
    m.time_headway = 0.1 + (rng() % 1000) / 250.0;
    const double v1 = (rng() % 2000) / 100.0;
    const double v2 = v1 + (rng() % 500) / 100.0;
    CHECK(gap_required(v2, m) >= gap_required(v1, m));
  }
}

TEST_CASE("rear-end check: parallel cruising trajectories are safe") {
  SafetyGapModel m;  // gap at v=10 is 14 m; 50 m offset is plenty
  Trajectory lead, follow;
  lead.append(TrajectorySegment::cruise(0.0, 30.0, 50.0, 10.0));
  follow.append(TrajectorySegment::cruise(0.0, 30.0, 0.0, 10.0));
  const auto rep = check_rear_end_safety(lead, follow, m, 0.1);
  CHECK(rep.comparable);
  CHECK(rep.safe());
}

TEST_CASE("rear-end check: follower reaching the leader is flagged at first crossing") {
  SafetyGapModel m;
  Trajectory lead, follow;
  lead.append(TrajectorySegment::cruise(0.0, 30.0, 30.0, 5.0));
  follow.append(TrajectorySegment::cruise(0.0, 30.0, 0.0, 8.0));  // closes 3 m/s
  const auto rep = check_rear_end_safety(lead, follow, m, 0.1);
  CHECK(rep.comparable);
  REQUIRE_FALSE(rep.safe());
  // Violation starts once 30 - 3t < 2 + 1.2*8, i.e. t > 6.13.
  CHECK(rep.violations.front().t == doctest::Approx(6.2).epsilon(0.02));
}

TEST_CASE("rear-end check: disjoint windows are not comparable") {
  SafetyGapModel m;
  Trajectory lead, follow;
  lead.append(TrajectorySegment::cruise(0.0, 5.0, 100.0, 10.0));
  follow.append(TrajectorySegment::cruise(10.0, 15.0, 0.0, 10.0));
  const auto rep = check_rear_end_safety(lead, follow, m, 0.1);
  CHECK_FALSE(rep.comparable);
  CHECK(rep.violations.empty());
}

TEST_CASE("rear-end check is invariant under a common time shift") {
  SafetyGapModel m;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const double v_lead = 4.0 + (rng() % 120) / 10.0;
    const double v_follow = 4.0 + (rng() % 120) / 10.0;
    const double offset = 5.0 + (rng() % 400) / 10.0;
    const double shift = (rng() % 500) / 10.0;

    Trajectory lead, follow, lead_s, follow_s;
    lead.append(TrajectorySegment::cruise(0.0, 20.0, offset, v_lead));
    follow.append(TrajectorySegment::cruise(0.0, 20.0, 0.0, v_follow));
    lead_s.append(TrajectorySegment::cruise(shift, 20.0 + shift, offset, v_lead));
    follow_s.append(TrajectorySegment::cruise(shift, 20.0 + shift, 0.0, v_follow));

    const auto a = check_rear_end_safety(lead, follow, m, 0.1);
    const auto b = check_rear_end_safety(lead_s, follow_s, m, 0.1);
    REQUIRE(a.violations.size() == b.violations.size());
    for (std::size_t k = 0; k < a.violations.size(); ++k) {
      CHECK(a.violations[k].t + shift ==
            doctest::Approx(b.violations[k].t).epsilon(1e-9));
      CHECK(a.violations[k].gap == doctest::Approx(b.violations[k].gap).epsilon(1e-9));
    }
  }
}

TEST_CASE("trajectory joints stay C1 for solver-built chains") {
  std::vector<Waypoint> wps = {{400.0, 23.5, 17.0}, {800.0, 73.5, 8.0},
                               {1200.0, 110.0, 11.0}};
  const Trajectory traj = chain_waypoints(0.0, 17.0, 0.0, wps);
  CHECK(traj.max_joint_position_gap() < 1e-9);
  CHECK(traj.max_joint_speed_gap() < 1e-9);
}

TEST_CASE("default corridor layout is valid and resolves labels") {
  const CorridorLayout c = CorridorLayout::default_layout();
  CHECK_NOTHROW(c.validate());
  const Zone& merge = c.zone(1);
  const Approach& main = c.approach("main");
  const Approach& ramp = c.approach("ramp");
  CHECK(c.path_label(main, merge) == "main");
  CHECK(c.path_label(ramp, merge) == "ramp");
  CHECK(c.path_label(ramp, c.zone(2)) == "main");
  CHECK(c.conflicting(merge, "main", "ramp"));
  CHECK(c.conflicting(merge, "ramp", "main"));
  CHECK_FALSE(c.conflicting(c.zone(2), "main", "main"));
  CHECK(c.lane_at(ramp, 100.0) == "ramp");
  CHECK(c.lane_at(ramp, 400.0) == "main");
  CHECK(c.desired_speed_at("main", 850.0) == doctest::Approx(8.0));
  CHECK(c.desired_speed_at("main", 1000.0) == doctest::Approx(11.0));
}

TEST_CASE("layout validation rejects broken geometry") {
  CorridorLayout c = CorridorLayout::default_layout();
  c.zones[1].entry_pos = 200.0;  // no longer increasing
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = CorridorLayout::default_layout();
  c.zones[0].control_zone_start = 450.0;  // downstream of the entry
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
