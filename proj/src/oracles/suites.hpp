#pragma once

// Oracle-backed check suites shared by the verify subcommand and the
// acceptance runner.

#include <string>
#include <vector>

#include "cavsim/metrics.hpp"
#include "cavsim/powertrain.hpp"
#include "oracles/oracles.hpp"

namespace cavsim::oracles {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Analytic segment costs against the discretized QP on random boundary
/// values; free-speed transversality must hold exactly.
CheckResult solver_random_suite(int instances, int qp_steps, unsigned seed,
                                double rel_tol);

/// The two hand-derived boundary-value instances, coefficients to 1e-9.
CheckResult solver_hand_suite();

/// pareto_split against the brute-force grid argmax on random queries.
CheckResult pareto_random_suite(int queries, unsigned seed,
                                const PowertrainParams& params, double tol);

/// Table lookup objective within rel_loss of the direct argmax.
CheckResult online_random_suite(const ParetoTable& table, int queries,
                                unsigned seed, const PowertrainParams& params,
                                double rel_loss);

/// Greedy per-stage policy against relative value iteration on the tiny
/// average-cost MDP.
CheckResult mdp_suite(const PowertrainParams& params, double tol);

/// Wheel-energy balance of every vehicle ledger in a finished run.
CheckResult energy_audit_suite(const MetricsReport& report, double rel_tol);

}  // namespace cavsim::oracles
