#pragma once

#include <stdexcept>
#include <string>

#include "cavsim/config.hpp"
#include "cavsim/metrics.hpp"
#include "cavsim/powertrain.hpp"

namespace cavsim {

/// A rear-end gap violation in a CAV scenario is a coordination bug, not a
/// statistic: the run aborts with this diagnostic.
class SafetyViolationError : public std::runtime_error {
 public:
  SafetyViolationError(double t, VehicleId leader, VehicleId follower,
                       double gap, double required, double p_leader = 0.0,
                       double v_leader = 0.0, double v_follower = 0.0);

  double time() const { return time_; }
  VehicleId leader() const { return leader_; }
  VehicleId follower() const { return follower_; }

 private:
  double time_;
  VehicleId leader_, follower_;
};

/// Fixed-step scenario run. A prebuilt Pareto table may be shared across
/// runs; when absent and the optimal PT variant is enabled, the table is
/// built from the config's grids first.
RunOutputs run_scenario(const ScenarioConfig& config,
                        const ParetoTable* table = nullptr);

}  // namespace cavsim
