#include "cavsim/ocp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cavsim {
namespace {

void require_horizon(const BoundaryConditions& bc) {
  if (!(bc.horizon() >= kMinHorizon))
    throw std::invalid_argument("ocp: horizon too short");
  if (!(bc.pf > bc.p0))
    throw std::invalid_argument("ocp: pf must exceed p0");
}

double segment_cost(double a, double b, double T) {
  // (1/2) * integral_0^T (a tau + b)^2 dtau
  return 0.5 * (a * a * T * T * T / 3.0 + a * b * T * T + b * b * T);
}

OcpSolution make_solution(const BoundaryConditions& bc, double a, double b) {
  OcpSolution sol;
  sol.control_slope = a;
  sol.control_offset = b;
  sol.segment =
      TrajectorySegment::from_control(bc.t0, bc.tf, bc.p0, bc.v0, a, b);
  sol.cost = segment_cost(a, b, bc.horizon());
  return sol;
}

}  // namespace

std::string FeasibilityFlags::describe() const {
  if (feasible()) return "feasible";
  std::ostringstream os;
  if (!u_min_ok) os << "u_min violated (u reaches " << u_lo << "); ";
  if (!u_max_ok) os << "u_max violated (u reaches " << u_hi << "); ";
  if (!v_min_ok) os << "v_min violated (v reaches " << v_lo << "); ";
  if (!v_max_ok) os << "v_max violated (v reaches " << v_hi << "); ";
  return os.str();
}

OcpSolution solve_free_terminal_speed(const BoundaryConditions& bc) {
  require_horizon(bc);
  const double T = bc.horizon();
  // Stationarity makes u affine; the free terminal speed forces u(tf) = 0,
  // leaving one unknown fixed by the terminal position.
  const double excess = bc.pf - bc.p0 - bc.v0 * T;
  const double a = -3.0 * excess / (T * T * T);
  const double b = -(a * T);  // u(tf) == 0 exactly, also in floating point
  return make_solution(bc, a, b);
}

OcpSolution solve_fixed_terminal_speed(const BoundaryConditions& bc) {
  require_horizon(bc);
  if (!bc.vf.has_value())
    throw std::invalid_argument("solve_fixed_terminal_speed: vf missing");
  const double T = bc.horizon();
  const double dv = *bc.vf - bc.v0;
  const double excess = bc.pf - bc.p0 - bc.v0 * T;
  // Solve [T, T^2/2; T^2/2, T^3/6] [b; a] = [dv; excess].
  const double a = 6.0 * dv / (T * T) - 12.0 * excess / (T * T * T);
  const double b = -2.0 * dv / T + 6.0 * excess / (T * T);
  return make_solution(bc, a, b);
}

OcpSolution solve_segment(const BoundaryConditions& bc) {
  return bc.vf.has_value() ? solve_fixed_terminal_speed(bc)
                           : solve_free_terminal_speed(bc);
}

Trajectory chain_waypoints(double p0, double v0, double t0,
                           const std::vector<Waypoint>& waypoints) {
  if (waypoints.empty())
    throw std::invalid_argument("chain_waypoints: no waypoints");
  Trajectory traj;
  double p = p0, v = v0, t = t0;
  for (const auto& wp : waypoints) {
    if (!(wp.time > t))
      throw std::invalid_argument("chain_waypoints: waypoint times not increasing");
    if (!(wp.position > p))
      throw std::invalid_argument("chain_waypoints: waypoint positions not increasing");
    BoundaryConditions bc;
    bc.t0 = t;
    bc.tf = wp.time;
    bc.p0 = p;
    bc.pf = wp.position;
    bc.v0 = v;
    bc.vf = wp.exit_speed;
    traj.append(solve_fixed_terminal_speed(bc).segment);
    p = wp.position;
    v = wp.exit_speed;
    t = wp.time;
  }
  return traj;
}

FeasibilityFlags check_feasibility(const TrajectorySegment& seg,
                                   const ControlBounds& bounds) {
  FeasibilityFlags f;
  const double T = seg.duration();
  const double u0 = seg.accel(seg.t0);
  const double u1 = seg.accel(seg.t1);
  f.u_lo = std::min(u0, u1);
  f.u_hi = std::max(u0, u1);

  const double vA = seg.speed(seg.t0);
  const double vB = seg.speed(seg.t1);
  f.v_lo = std::min(vA, vB);
  f.v_hi = std::max(vA, vB);
  // v is quadratic: vertex where u = 0, at tau = -b/a.
  const double a = 6.0 * seg.c3;
  const double b = 2.0 * seg.c2;
  if (a != 0.0) {
    const double tau_star = -b / a;
    if (tau_star > 0.0 && tau_star < T) {
      const double v_star = seg.speed(seg.t0 + tau_star);
      f.v_lo = std::min(f.v_lo, v_star);
      f.v_hi = std::max(f.v_hi, v_star);
    }
  }
  f.u_min_ok = f.u_lo >= bounds.u_min - 1e-12;
  f.u_max_ok = f.u_hi <= bounds.u_max + 1e-12;
  f.v_min_ok = f.v_lo >= bounds.v_min - 1e-12;
  f.v_max_ok = f.v_hi <= bounds.v_max + 1e-12;
  return f;
}

FeasibilityFlags check_feasibility(const OcpSolution& sol,
                                   const ControlBounds& bounds) {
  return check_feasibility(sol.segment, bounds);
}

QpSolution qp_oracle(const BoundaryConditions& bc, int n_steps) {
  if (n_steps < 10) throw std::invalid_argument("qp_oracle: n_steps < 10");
  if (!(bc.horizon() >= kMinHorizon))
    throw std::invalid_argument("qp_oracle: horizon too short");

  const int n = n_steps;
  const int m = n + 1;  // control knots
  const double T = bc.horizon();
  const double dt = T / n;

  // Hessian of (1/2) integral u^2 for piecewise-linear u: tridiagonal,
  // dt/3 on the end diagonal entries, 2dt/3 inside, dt/6 off-diagonal.
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(m, 2.0 * dt / 3.0);
  diag(0) = dt / 3.0;
  diag(m - 1) = dt / 3.0;
  const double off = dt / 6.0;

  // Constraint rows: sensitivities of p_n (and v_n) to each control knot,
  // accumulated by a reverse sweep through the discrete dynamics
  //   v_{k+1} = v_k + dt (u_k + u_{k+1}) / 2
  //   p_{k+1} = p_k + dt v_k + dt^2 (2 u_k + u_{k+1}) / 6.
  auto sensitivity = [&](bool target_position) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    double gp = target_position ? 1.0 : 0.0;
    double gv = target_position ? 0.0 : 1.0;
    for (int k = n - 1; k >= 0; --k) {
      g(k) += gp * (dt * dt / 3.0) + gv * (dt / 2.0);
      g(k + 1) += gp * (dt * dt / 6.0) + gv * (dt / 2.0);
      gv += gp * dt;
    }
    return g;
  };

  const bool fixed_vf = bc.vf.has_value();
  const int rows = fixed_vf ? 2 : 1;
  Eigen::MatrixXd A(rows, m);
  Eigen::VectorXd rhs(rows);
  A.row(0) = sensitivity(true).transpose();
  rhs(0) = bc.pf - bc.p0 - bc.v0 * T;
  if (fixed_vf) {
    A.row(1) = sensitivity(false).transpose();
    rhs(1) = *bc.vf - bc.v0;
  }

  // Thomas solve of the tridiagonal system H y = r.
  auto tridiag_solve = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd c(m), d(m);
    c(0) = off / diag(0);
    d(0) = r(0) / diag(0);
    for (int i = 1; i < m; ++i) {
      const double denom = diag(i) - off * c(i - 1);
      c(i) = (i < m - 1) ? off / denom : 0.0;
      d(i) = (r(i) - off * d(i - 1)) / denom;
    }
    Eigen::VectorXd y(m);
    y(m - 1) = d(m - 1);
    for (int i = m - 2; i >= 0; --i) y(i) = d(i) - c(i) * y(i + 1);
    return y;
  };

  Eigen::MatrixXd Y(m, rows);
  for (int r = 0; r < rows; ++r) Y.col(r) = tridiag_solve(A.row(r).transpose());

  const Eigen::MatrixXd S = A * Y;  // Schur complement, rows x rows
  const double det = (rows == 1) ? S(0, 0)
                                 : S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
  if (std::abs(det) < 1e-14)
    throw std::runtime_error("qp_oracle: singular boundary-value system");
  const Eigen::VectorXd lambda = S.fullPivLu().solve(rhs);

  QpSolution out;
  out.u = Y * lambda;
  out.cost = 0.5 * lambda.dot(rhs);

  out.t.resize(m);
  out.p.resize(m);
  out.v.resize(m);
  out.p(0) = bc.p0;
  out.v(0) = bc.v0;
  out.t(0) = bc.t0;
  for (int k = 0; k < n; ++k) {
    out.t(k + 1) = bc.t0 + (k + 1) * dt;
    out.p(k + 1) = out.p(k) + dt * out.v(k) +
                   dt * dt * (2.0 * out.u(k) + out.u(k + 1)) / 6.0;
    out.v(k + 1) = out.v(k) + dt * (out.u(k) + out.u(k + 1)) / 2.0;
  }
  return out;
}

}  // namespace cavsim
