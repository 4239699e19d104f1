#include "oracles/suites.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "cavsim/ocp.hpp"

namespace cavsim::oracles {
namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

double uniform(std::mt19937_64& rng) {
  return (rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

CheckResult solver_random_suite(int instances, int qp_steps, unsigned seed,
                                double rel_tol) {
  Timer timer;
  CheckResult res;
  res.name = "solver vs QP oracle (" + std::to_string(instances) + " random instances)";
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  bool transversality_ok = true;
  for (int i = 0; i < instances; ++i) {
    BoundaryConditions bc;
    bc.t0 = 5.0 * uniform(rng);
    const double horizon = 2.0 + 18.0 * uniform(rng);
    bc.tf = bc.t0 + horizon;
    bc.p0 = 500.0 * uniform(rng);
    const double mean_speed = 1.0 + 18.0 * uniform(rng);
    bc.pf = bc.p0 + mean_speed * horizon;
    bc.v0 = 20.0 * uniform(rng);
    const bool fixed = uniform(rng) < 0.5;
    if (fixed) bc.vf = 20.0 * uniform(rng);

    const OcpSolution sol = solve_segment(bc);
    if (!fixed) {
      if (sol.control(bc.tf) != 0.0) transversality_ok = false;
    }
    const QpSolution qp = qp_oracle(bc, qp_steps);
    const double denom = std::max({sol.cost, qp.cost, 1e-9});
    worst = std::max(worst, std::abs(sol.cost - qp.cost) / denom);
  }
  res.seconds = timer.seconds();
  res.pass = worst <= rel_tol && transversality_ok;
  std::ostringstream os;
  os << "worst relative cost error " << worst << " (tol " << rel_tol << ")"
     << (transversality_ok ? ", u(tf)=0 exact" : ", TRANSVERSALITY BROKEN")
     << ", " << res.seconds << " s";
  res.detail = os.str();
  return res;
}

CheckResult solver_hand_suite() {
  CheckResult res;
  res.name = "hand-derived boundary-value instances";
  BoundaryConditions bc;
  bc.t0 = 0.0;
  bc.tf = 10.0;
  bc.p0 = 0.0;
  bc.pf = 150.0;
  bc.v0 = 17.0;

  const OcpSolution free_v = solve_free_terminal_speed(bc);
  const bool free_ok = std::abs(free_v.control_slope - 0.06) < 1e-9 &&
                       std::abs(free_v.control_offset - (-0.6)) < 1e-9 &&
                       std::abs(free_v.cost - 0.6) < 1e-9;

  bc.vf = 8.0;
  const OcpSolution fixed_v = solve_fixed_terminal_speed(bc);
  const bool fixed_ok = std::abs(fixed_v.control_slope - (-0.3)) < 1e-9 &&
                        std::abs(fixed_v.control_offset - 0.6) < 1e-9;

  res.pass = free_ok && fixed_ok;
  std::ostringstream os;
  os << "free-speed (a,b,cost)=(" << free_v.control_slope << ','
     << free_v.control_offset << ',' << free_v.cost << "), fixed-speed (a,b)=("
     << fixed_v.control_slope << ',' << fixed_v.control_offset << ")";
  res.detail = os.str();
  return res;
}

CheckResult pareto_random_suite(int queries, unsigned seed,
                                const PowertrainParams& params, double tol) {
  Timer timer;
  CheckResult res;
  res.name = "pareto_split vs brute-force grid (" + std::to_string(queries) +
             " random queries)";
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < queries; ++i) {
    PowertrainState s;
    s.engine_rpm = params.engine.max_speed_rpm * uniform(rng);
    s.motor_rpm = params.motor.max_speed_rpm * uniform(rng);
    const double t_driver =
        params.min_demand() +
        (params.max_demand() - params.min_demand()) * uniform(rng);
    const double alpha = uniform(rng);
    const SplitResult impl = pareto_split(s, t_driver, alpha, params);
    const BruteForceSplit oracle =
        pareto_bruteforce(s.engine_rpm, s.motor_rpm, t_driver, alpha, params);
    const double impl_obj = split_objective(s, impl.split, alpha, params);
    worst = std::max(worst, std::abs(impl_obj - oracle.objective));
  }
  res.seconds = timer.seconds();
  res.pass = worst <= tol;
  std::ostringstream os;
  os << "worst objective gap " << worst << " (tol " << tol << "), "
     << res.seconds << " s";
  res.detail = os.str();
  return res;
}

CheckResult online_random_suite(const ParetoTable& table, int queries,
                                unsigned seed, const PowertrainParams& params,
                                double rel_loss) {
  Timer timer;
  CheckResult res;
  res.name = "online table lookup vs direct split (" + std::to_string(queries) +
             " random queries)";
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < queries; ++i) {
    PowertrainState s;
    s.engine_rpm = params.engine.max_speed_rpm * uniform(rng);
    s.motor_rpm = params.motor.max_speed_rpm * uniform(rng);
    const double t_driver =
        params.min_demand() +
        (params.max_demand() - params.min_demand()) * uniform(rng);
    const double alpha = uniform(rng);
    const SplitResult direct = pareto_split(s, t_driver, alpha, params);
    const SplitResult online = online_policy(table, s, t_driver, alpha, params);
    const double j_direct = split_objective(s, direct.split, alpha, params);
    const double j_online = split_objective(s, online.split, alpha, params);
    if (j_direct > 1e-9)
      worst = std::max(worst, (j_direct - j_online) / j_direct);
  }
  res.seconds = timer.seconds();
  res.pass = worst <= rel_loss;
  std::ostringstream os;
  os << "worst relative objective loss " << worst * 100.0 << "% (tol "
     << rel_loss * 100.0 << "%), " << res.seconds << " s";
  res.detail = os.str();
  return res;
}

CheckResult mdp_suite(const PowertrainParams& params, double tol) {
  Timer timer;
  CheckResult res;
  res.name = "greedy policy vs relative value iteration (5x5 average-cost MDP)";
  const TinyMdp mdp = make_tiny_mdp(5, 20240507u, params);
  const double greedy = greedy_policy_average_cost(mdp, params);
  const double optimal = rvi_optimal_average_cost(mdp, params);
  res.seconds = timer.seconds();
  res.pass = std::abs(greedy - optimal) <= tol && res.seconds < 5.0;
  std::ostringstream os;
  os << "J_greedy=" << greedy << " J_rvi=" << optimal << " |diff|="
     << std::abs(greedy - optimal) << " (tol " << tol << "), " << res.seconds
     << " s";
  res.detail = os.str();
  return res;
}

CheckResult energy_audit_suite(const MetricsReport& report, double rel_tol) {
  CheckResult res;
  res.name = "wheel-energy balance audit";
  double worst = 0.0;
  int checked = 0;
  for (const auto& v : report.vehicles) {
    for (const auto* m : {&v.pt_baseline, &v.pt_optimal}) {
      if (m->stages == 0) continue;
      const double lhs = m->wheel_mech_wh;
      const double rhs = m->engine_mech_wh + m->motor_mech_wh - m->brake_wh;
      const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-9});
      worst = std::max(worst, std::abs(lhs - rhs) / denom);
      ++checked;
    }
  }
  res.pass = worst <= rel_tol && checked > 0;
  std::ostringstream os;
  os << checked << " ledgers, worst relative imbalance " << worst << " (tol "
     << rel_tol << ")";
  res.detail = os.str();
  return res;
}

}  // namespace cavsim::oracles
