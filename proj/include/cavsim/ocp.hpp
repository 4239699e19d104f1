#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cavsim/corridor.hpp"
#include "cavsim/trajectory.hpp"

namespace cavsim {

/// Minimum horizon accepted by the solvers.
inline constexpr double kMinHorizon = 0.05;  // s

/// Two-point boundary data for one minimum-effort segment. A missing vf
/// leaves the terminal speed free.
struct BoundaryConditions {
  double t0 = 0.0;
  double tf = 0.0;
  double p0 = 0.0;
  double pf = 0.0;
  double v0 = 0.0;
  std::optional<double> vf;

  double horizon() const { return tf - t0; }
};

struct FeasibilityFlags {
  bool u_min_ok = true;
  bool u_max_ok = true;
  bool v_min_ok = true;
  bool v_max_ok = true;
  // Extreme values attained on the segment, for diagnostics.
  double u_lo = 0.0, u_hi = 0.0, v_lo = 0.0, v_hi = 0.0;

  bool feasible() const { return u_min_ok && u_max_ok && v_min_ok && v_max_ok; }
  std::string describe() const;
};

/// Solution of one segment: affine control u(tau) = a tau + b in local time.
struct OcpSolution {
  TrajectorySegment segment;
  double control_slope = 0.0;   // a
  double control_offset = 0.0;  // b
  double cost = 0.0;            // (1/2) integral of u^2

  double control(double t) const {
    return control_slope * (t - segment.t0) + control_offset;
  }
};

/// Minimum-effort segment hitting pf at tf with the terminal speed left
/// free (so the control vanishes at tf).
OcpSolution solve_free_terminal_speed(const BoundaryConditions& bc);

/// Minimum-effort segment meeting all four of p0, v0, pf, vf.
OcpSolution solve_fixed_terminal_speed(const BoundaryConditions& bc);

/// Dispatches on whether bc.vf is present.
OcpSolution solve_segment(const BoundaryConditions& bc);

struct Waypoint {
  double position = 0.0;
  double time = 0.0;
  double exit_speed = 0.0;
};

/// Chains fixed-terminal-speed segments through the waypoints. Waypoint
/// times and positions must be strictly increasing; throws otherwise.
Trajectory chain_waypoints(double p0, double v0, double t0,
                           const std::vector<Waypoint>& waypoints);

/// Exact feasibility of a segment against the bounds: the affine control is
/// extremal at the endpoints, the quadratic speed also at its vertex.
FeasibilityFlags check_feasibility(const OcpSolution& sol,
                                   const ControlBounds& bounds);
FeasibilityFlags check_feasibility(const TrajectorySegment& seg,
                                   const ControlBounds& bounds);

/// Discretized verification oracle for the segment solvers. The control is
/// piecewise linear on an n_steps grid, the double-integrator dynamics use
/// the trapezoidal velocity update with the matching position quadrature,
/// and the equality-constrained quadratic program is solved directly via
/// its Schur complement. Independent of the closed-form path.
struct QpSolution {
  double cost = 0.0;
  Eigen::VectorXd t;  // n_steps + 1 knots
  Eigen::VectorXd p;
  Eigen::VectorXd v;
  Eigen::VectorXd u;
};

QpSolution qp_oracle(const BoundaryConditions& bc, int n_steps);

}  // namespace cavsim
