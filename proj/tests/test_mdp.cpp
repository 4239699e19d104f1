#include <doctest.h>

#include <cmath>

#include "cavsim/powertrain.hpp"
#include "oracles/oracles.hpp"

using namespace cavsim;

TEST_CASE("tiny MDP: transitions are row-stochastic and strictly positive") {
  const PowertrainParams p;
  const oracles::TinyMdp mdp = oracles::make_tiny_mdp(5, 20240507u, p);
  REQUIRE(mdp.states.size() == 25);
  for (int r = 0; r < mdp.transitions.rows(); ++r) {
    CHECK(mdp.transitions.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mdp.transitions.row(r).minCoeff() > 0.0);
  }
  double prob = 0.0;
  for (double w : mdp.demand_probs) prob += w;
  CHECK(prob == doctest::Approx(1.0));
}

TEST_CASE("greedy per-stage policy attains the RVI optimal average cost") {
  const PowertrainParams p;
  const oracles::TinyMdp mdp = oracles::make_tiny_mdp(5, 20240507u, p);
  const double greedy = oracles::greedy_policy_average_cost(mdp, p);
  const double optimal = oracles::rvi_optimal_average_cost(mdp, p);
  CHECK(greedy == doctest::Approx(optimal).epsilon(1e-11));
  CHECK(std::abs(greedy - optimal) < 1e-9);
  // Sanity: the cost of a one-stage decision lies in (0, 1).
  CHECK(optimal > 0.0);
  CHECK(optimal < 1.0);
}

TEST_CASE("RVI gain is insensitive to the transition seed scale") {
  const PowertrainParams p;
  for (unsigned seed : {1u, 99u, 4242u}) {
    const oracles::TinyMdp mdp = oracles::make_tiny_mdp(5, seed, p);
    const double greedy = oracles::greedy_policy_average_cost(mdp, p);
    const double optimal = oracles::rvi_optimal_average_cost(mdp, p);
    CHECK(std::abs(greedy - optimal) < 1e-9);
  }
}
