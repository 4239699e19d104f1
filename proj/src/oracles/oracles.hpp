#pragma once

// Independent verification routes. Everything here re-derives its answer
// without calling the implementation path it is used to check.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cavsim/powertrain.hpp"

namespace cavsim::oracles {

struct BruteForceSplit {
  double t_eng = 0.0;
  double t_mot = 0.0;
  double objective = 0.0;
};

/// Exhaustive scan of the torque grid (same grid contract as the
/// implementation: lower bound plus integer steps, exact upper bound
/// included) with the efficiency surfaces re-evaluated from their closed
/// forms inline.
BruteForceSplit pareto_bruteforce(double n_eng_rpm, double n_mot_rpm,
                                  double t_driver, double alpha,
                                  const PowertrainParams& p);

/// Small average-cost MDP over powertrain states with i.i.d. torque demand
/// and action-independent transitions.
struct TinyMdp {
  std::vector<PowertrainState> states;
  Eigen::MatrixXd transitions;  // row-stochastic, action-independent
  std::vector<double> demands;
  std::vector<double> demand_probs;
  double alpha = 0.5;
};

TinyMdp make_tiny_mdp(int side, unsigned seed, const PowertrainParams& p);

/// Optimal long-run average cost by relative value iteration on the
/// (state, demand) chain, minimizing over the brute-force torque grid.
double rvi_optimal_average_cost(const TinyMdp& mdp, const PowertrainParams& p,
                                double span_tol = 1e-12,
                                int max_iters = 200000);

/// Exact average cost of the greedy per-stage policy (the implementation's
/// pareto_split) under the stationary distribution of the chain.
double greedy_policy_average_cost(const TinyMdp& mdp,
                                  const PowertrainParams& p);

}  // namespace cavsim::oracles
