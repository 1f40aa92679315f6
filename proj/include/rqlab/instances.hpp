#pragma once

#include "rqlab/pomdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rqlab {

/// Two hidden states, stay/switch actions that succeed with probability
/// `switch_success`, and a noisy observation of the state. Reward 1 in state 1.
Pomdp two_state_drift(double observation_noise = 0.2, double discount = 0.7,
                      double switch_success = 0.9);

/// Y = S, identity observations; every state recurrent; rewards in [0, 1].
Pomdp fully_observed3(double discount = 0.9);

/// Five-cell corridor with the goal in the last cell. Moves succeed with
/// probability 0.8; "right" from the cell before the goal always reaches it
/// and pays 1. The goal is terminal and its transition row restarts.
Pomdp sparse_corridor(double discount = 0.99);

std::vector<std::string> canonical_names();
/// Throws Error for unknown names.
Pomdp canonical_instance(const std::string& name);

struct RandomInstanceSpec {
  int min_states = 2, max_states = 4;
  int min_obs = 2, max_obs = 3;
  int min_actions = 2, max_actions = 2;
  double concentration = 1.0;
  /// Probability that an entry of a stochastic row is forced to zero (one
  /// entry per row always survives).
  double sparsity = 0.0;
  double reward_lo = 0.0, reward_hi = 1.0;
  double discount = 0.9;
  std::uint64_t seed = 0;
};

/// Symmetric-Dirichlet rows, uniform rewards; deterministic in `spec`.
Pomdp generate_instance(const RandomInstanceSpec& spec);

/// Seeds of the randomized suite: instance k uses splitmix64-derived seeds.
std::uint64_t suite_instance_seed(std::uint64_t base, int k);

}  // namespace rqlab
