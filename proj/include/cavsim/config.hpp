#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "cavsim/coordination.hpp"
#include "cavsim/corridor.hpp"
#include "cavsim/driver.hpp"
#include "cavsim/powertrain.hpp"

namespace cavsim {

enum class ScenarioKind { baseline, isolated, corridor };
enum class DemandLevel { light, medium, heavy };
enum class PtPolicyKind { baseline, optimal, both };

std::string to_string(ScenarioKind k);
std::string to_string(DemandLevel d);
std::string to_string(PtPolicyKind p);
ScenarioKind scenario_from_string(const std::string& s);
DemandLevel demand_from_string(const std::string& s);
PtPolicyKind pt_policy_from_string(const std::string& s);

/// Mainline arrival rates (veh/h) per demand level; other approaches scale
/// by their demand_fraction.
struct DemandRates {
  double light = 400.0;
  double medium = 700.0;
  double heavy = 1000.0;

  double rate(DemandLevel level) const;
};

struct StopEventSpec {
  double speed_threshold = 0.5;  // m/s
  double min_duration = 1.0;     // s
};

struct SignalConfig {
  ZoneId zone = 0;
  SignalSpec spec;
};

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::corridor;
  DemandLevel demand = DemandLevel::medium;
  unsigned long seed = 1;
  double dt = 0.1;          // s
  double duration = 900.0;  // s
  double warmup = 120.0;    // s, vehicles entering earlier are not counted
  PtPolicyKind pt_policy = PtPolicyKind::both;

  CorridorLayout corridor = CorridorLayout::default_layout();
  ControlBounds bounds;
  SafetyGapModel gap;
  DriverParams driver;
  YieldRule yield;
  std::optional<SignalConfig> signal;
  CoordinationParams coordination;
  PowertrainParams powertrain;
  DemandRates rates;
  StopEventSpec stop_event;
  double spawn_gap_margin = 2.0;  // m beyond the safe gap demanded at entry
  bool log_trajectories = true;

  void validate() const;
};

ScenarioConfig default_config();

nlohmann::json to_json(const ScenarioConfig& c);
ScenarioConfig config_from_json(const nlohmann::json& j);

ScenarioConfig load_config_file(const std::string& path);
void save_config_file(const ScenarioConfig& c, const std::string& path);

/// True when two configs describe the same experiment apart from the
/// scenario/seed/pt choice (required for run comparisons).
bool comparable_configs(const ScenarioConfig& a, const ScenarioConfig& b);

}  // namespace cavsim
