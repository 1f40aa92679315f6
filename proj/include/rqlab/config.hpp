#pragma once

#include "rqlab/agent_state.hpp"
#include "rqlab/bounds.hpp"
#include "rqlab/instances.hpp"
#include "rqlab/pomdp.hpp"
#include "rqlab/rql.hpp"
#include "rqlab/rql_ais.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rqlab {

/// Malformed or out-of-range configuration (maps to the usage exit code).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SuiteOptions {
  int instances = 100;
  std::uint64_t seed = 20240101;
  std::vector<int> frame_stacks{1, 2};
  std::vector<std::string> ipms{"tv", "wasserstein"};
  RandomInstanceSpec random;
  CertifyOptions certify;
};

struct ExperimentConfig {
  std::string mode;
  std::vector<std::uint64_t> seeds{1};
  std::string out = "out";
  /// Canonical instance name, path to an instance JSON, or "random".
  std::string instance = "TwoStateDrift";
  RandomInstanceSpec random;
  /// "frame_stack:<n>" or a path to a machine JSON.
  std::string representation = "frame_stack:2";
  /// "uniform" or a path to a JSON file {"policy": [[...], ...]} over Z x A.
  std::string exploration = "uniform";
  std::optional<double> gamma;
  std::string ipm = "tv";
  double solver_tol = 1e-10;
  /// Horizon of the optional history-value dump of `solve` (0: none).
  int history_horizon = 0;
  CertifyOptions certify;
  RqlOptions rql;
  RqlAisConfig ais;
  SuiteOptions suite;
};

/// Reads a key/value file with [sections]; unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);
/// Range checks (gamma in [0, 1), lambda in [0, 1], ...). Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// Resolves the instance source and applies the gamma override.
Pomdp resolve_instance(const ExperimentConfig& cfg);
AgentStateMachine resolve_representation(const std::string& spec, const Pomdp& p);
AgentPolicy resolve_exploration(const std::string& spec, const AgentStateMachine& m, const Pomdp& p);

}  // namespace rqlab
