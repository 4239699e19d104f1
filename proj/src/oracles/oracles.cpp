#include "oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cavsim::oracles {
namespace {

// Closed-form surface evaluation, written out independently of
// EfficiencyMap::value.
double surface(double n, double t, double peak, double n0, double nw,
               double t0, double tw, double n_max, double t_max,
               bool abs_torque) {
  if (abs_torque) t = std::fabs(t);
  if (n < 0.0) n = 0.0;
  if (n > n_max) n = n_max;
  if (t < 0.0) t = 0.0;
  if (t > t_max) t = t_max;
  const double a = (n - n0) / nw;
  const double b = (t - t0) / tw;
  return peak * std::exp(-(a * a) - (b * b));
}

double engine_eta(double n, double t, const PowertrainParams& p) {
  return surface(n, t, p.engine.peak_eff, p.engine.peak_speed_rpm,
                 p.engine.speed_width_rpm, p.engine.peak_torque_nm,
                 p.engine.torque_width_nm, p.engine.max_speed_rpm,
                 p.engine.max_torque_nm, false);
}

double motor_eta(double n, double t, const PowertrainParams& p) {
  return surface(n, t, p.motor.peak_eff, p.motor.peak_speed_rpm,
                 p.motor.speed_width_rpm, p.motor.peak_torque_nm,
                 p.motor.torque_width_nm, p.motor.max_speed_rpm,
                 p.motor.max_torque_nm, true);
}

double weighted(double n_eng, double n_mot, double t_eng, double t_mot,
                double alpha, const PowertrainParams& p) {
  double obj = 0.0;
  if (t_eng > 1e-12) obj += alpha * engine_eta(n_eng, t_eng, p);
  if (std::fabs(t_mot) > 1e-12) obj += (1.0 - alpha) * motor_eta(n_mot, t_mot, p);
  return obj;
}

}  // namespace

BruteForceSplit pareto_bruteforce(double n_eng_rpm, double n_mot_rpm,
                                  double t_driver, double alpha,
                                  const PowertrainParams& p) {
  BruteForceSplit best;
  if (t_driver <= 0.0) {
    best.t_eng = 0.0;
    best.t_mot = std::max(t_driver, -p.motor.max_torque_nm);
    best.objective = weighted(n_eng_rpm, n_mot_rpm, 0.0, best.t_mot, alpha, p);
    return best;
  }
  if (t_driver > p.max_demand() + 1e-9)
    throw std::domain_error("pareto_bruteforce: demand out of envelope");

  const double lo = std::max(0.0, t_driver - p.motor.max_torque_nm);
  const double hi =
      std::min(p.engine.max_torque_nm, t_driver + p.motor.max_torque_nm);
  const double step = p.split_grid_step_nm;

  best.objective = -1.0;
  const int n_steps = static_cast<int>(std::ceil((hi - lo) / step));
  for (int k = 0; k <= n_steps; ++k) {
    double t_eng = lo + k * step;
    if (!(t_eng < hi)) t_eng = hi;  // exact upper bound closes the grid
    const double t_mot = t_driver - t_eng;
    const double obj = weighted(n_eng_rpm, n_mot_rpm, t_eng, t_mot, alpha, p);
    if (obj > best.objective + 1e-12) {
      best.objective = obj;
      best.t_eng = t_eng;
      best.t_mot = t_mot;
    }
    if (t_eng == hi) break;
  }
  return best;
}

TinyMdp make_tiny_mdp(int side, unsigned seed, const PowertrainParams& p) {
  (void)p;
  TinyMdp mdp;
  const int n = side * side;
  std::mt19937_64 rng(seed);
  auto uniform = [&]() { return (rng() >> 11) * (1.0 / 9007199254740992.0); };

  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      PowertrainState s;
      s.engine_rpm = 800.0 + 600.0 * i;
      s.motor_rpm = 500.0 + 1000.0 * j;
      mdp.states.push_back(s);
    }
  }
  mdp.transitions.resize(n, n);
  for (int r = 0; r < n; ++r) {
    double row_sum = 0.0;
    for (int c = 0; c < n; ++c) {
      const double w = 0.05 + uniform();  // strictly positive: irreducible
      mdp.transitions(r, c) = w;
      row_sum += w;
    }
    mdp.transitions.row(r) /= row_sum;
  }
  mdp.demands = {-60.0, 30.0, 90.0, 150.0, 220.0};
  mdp.demand_probs = {0.2, 0.2, 0.2, 0.2, 0.2};
  mdp.alpha = 0.5;
  return mdp;
}

double rvi_optimal_average_cost(const TinyMdp& mdp, const PowertrainParams& p,
                                double span_tol, int max_iters) {
  const int n = static_cast<int>(mdp.states.size());
  const int m = static_cast<int>(mdp.demands.size());
  const int nm = n * m;

  // Minimal one-stage cost per (state, demand) via the brute-force grid.
  Eigen::VectorXd min_cost(nm);
  for (int s = 0; s < n; ++s) {
    for (int w = 0; w < m; ++w) {
      const auto split =
          pareto_bruteforce(mdp.states[s].engine_rpm, mdp.states[s].motor_rpm,
                            mdp.demands[w], mdp.alpha, p);
      min_cost(s * m + w) = 1.0 - split.objective;
    }
  }

  // Relative value iteration on the augmented (state, demand) chain; the
  // demand is i.i.d., so the successor distribution factorizes.
  Eigen::VectorXd h = Eigen::VectorXd::Zero(nm);
  double gain = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    // Expected next value per state: E_w'[h(s', w')].
    Eigen::VectorXd h_state(n);
    for (int s = 0; s < n; ++s) {
      double acc = 0.0;
      for (int w = 0; w < m; ++w) acc += mdp.demand_probs[w] * h(s * m + w);
      h_state(s) = acc;
    }
    const Eigen::VectorXd future = mdp.transitions * h_state;
    Eigen::VectorXd h_next(nm);
    for (int s = 0; s < n; ++s)
      for (int w = 0; w < m; ++w)
        h_next(s * m + w) = min_cost(s * m + w) + future(s);

    const Eigen::VectorXd diff = h_next - h;
    const double span = diff.maxCoeff() - diff.minCoeff();
    gain = 0.5 * (diff.maxCoeff() + diff.minCoeff());
    h = h_next - Eigen::VectorXd::Constant(nm, h_next(0));
    if (span < span_tol) return gain;
  }
  throw std::runtime_error("rvi_optimal_average_cost: no convergence");
}

double greedy_policy_average_cost(const TinyMdp& mdp,
                                  const PowertrainParams& p) {
  const int n = static_cast<int>(mdp.states.size());

  // Stationary distribution of the action-independent chain.
  Eigen::MatrixXd a = mdp.transitions.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(0).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(0) = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(b);

  double j = 0.0;
  for (int s = 0; s < n; ++s) {
    double expected = 0.0;
    for (std::size_t w = 0; w < mdp.demands.size(); ++w) {
      const SplitResult r =
          pareto_split(mdp.states[s], mdp.demands[w], mdp.alpha, p);
      expected += mdp.demand_probs[w] *
                  stage_cost(mdp.states[s], r, mdp.demands[w], mdp.alpha, p);
    }
    j += pi(s) * expected;
  }
  return j;
}

}  // namespace cavsim::oracles
