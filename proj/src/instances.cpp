#include "rqlab/instances.hpp"

#include "rqlab/rng.hpp"

#include <random>

namespace rqlab {

Pomdp two_state_drift(double observation_noise, double discount, double switch_success) {
  Pomdp p = Pomdp::zeros(2, 2, 2, discount);
  const double q = switch_success;
  // action 0 keeps the state, action 1 flips it, each succeeding with q
  p.transition[0] << q, 1 - q, 1 - q, q;
  p.transition[1] << 1 - q, q, q, 1 - q;
  for (int a = 0; a < 2; ++a) {
    p.observation[a] << 1 - observation_noise, observation_noise, observation_noise,
        1 - observation_noise;
  }
  p.reward << 0, 0, 1, 1;
  p.initial_state_dist << 0.5, 0.5;
  p.state_labels = {"low", "high"};
  p.obs_labels = {"see_low", "see_high"};
  p.action_labels = {"stay", "switch"};
  return p;
}

Pomdp fully_observed3(double discount) {
  Pomdp p = Pomdp::zeros(3, 3, 2, discount);
  p.transition[0] << 0.3, 0.7, 0.0,
                     0.0, 0.3, 0.7,
                     0.7, 0.0, 0.3;
  p.transition[1] << 0.6, 0.2, 0.2,
                     0.2, 0.6, 0.2,
                     0.2, 0.2, 0.6;
  for (int a = 0; a < 2; ++a) p.observation[a].setIdentity();
  p.reward << 0.0, 0.5,
              1.0, 0.2,
              0.3, 0.8;
  p.initial_state_dist << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  p.state_labels = {"s0", "s1", "s2"};
  p.obs_labels = {"o0", "o1", "o2"};
  p.action_labels = {"cycle", "mix"};
  return p;
}

Pomdp sparse_corridor(double discount) {
  constexpr int kCells = 5, kGoal = 4;
  Pomdp p = Pomdp::zeros(kCells, kCells, 2, discount);
  p.initial_state_dist = Vector::Zero(kCells);
  p.initial_state_dist(0) = 1.0;
  for (int s = 0; s < kGoal; ++s) {
    const int left = std::max(s - 1, 0), right = s + 1;
    p.transition[0](s, left) += 0.8;
    p.transition[0](s, s) += 0.2;
    if (right == kGoal) {
      p.transition[1](s, right) = 1.0;
    } else {
      p.transition[1](s, right) += 0.8;
      p.transition[1](s, s) += 0.2;
    }
  }
  for (int a = 0; a < 2; ++a) {
    p.transition[a].row(kGoal) = p.initial_state_dist.transpose();
    p.observation[a].setIdentity();
  }
  p.reward(kGoal - 1, 1) = 1.0;
  p.terminal.assign(kCells, false);
  p.terminal[kGoal] = true;
  p.state_labels = {"c0", "c1", "c2", "c3", "goal"};
  p.obs_labels = p.state_labels;
  p.action_labels = {"left", "right"};
  return p;
}

std::vector<std::string> canonical_names() {
  return {"TwoStateDrift", "FullyObserved3", "SparseCorridor"};
}

Pomdp canonical_instance(const std::string& name) {
  if (name == "TwoStateDrift") return two_state_drift();
  if (name == "FullyObserved3") return fully_observed3();
  if (name == "SparseCorridor") return sparse_corridor();
  throw Error("unknown canonical instance '" + name + "'");
}

namespace {

Vector dirichlet_row(int n, double concentration, double sparsity, Rng& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  const int keep = static_cast<int>(rng.uniform_int(n));
  Vector row(n);
  for (int i = 0; i < n; ++i) {
    const bool zero = i != keep && rng.uniform() < sparsity;
    double g = gamma(rng);
    if (zero) g = 0.0;
    row(i) = g;
  }
  if (!(row.sum() > 0.0)) row(keep) = 1.0;
  return row / row.sum();
}

int draw_between(int lo, int hi, Rng& rng) {
  return lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

Pomdp generate_instance(const RandomInstanceSpec& spec) {
  if (spec.min_states < 1 || spec.min_states > spec.max_states || spec.min_obs < 1 ||
      spec.min_obs > spec.max_obs || spec.min_actions < 1 || spec.min_actions > spec.max_actions) {
    throw Error("random instance size bounds are inconsistent");
  }
  if (!(spec.concentration > 0.0)) throw Error("Dirichlet concentration must be positive");
  if (spec.reward_lo > spec.reward_hi) throw Error("reward range is empty");
  Rng rng(spec.seed);
  const int S = draw_between(spec.min_states, spec.max_states, rng);
  const int Y = draw_between(spec.min_obs, spec.max_obs, rng);
  const int A = draw_between(spec.min_actions, spec.max_actions, rng);
  Pomdp p = Pomdp::zeros(S, Y, A, spec.discount);
  for (int a = 0; a < A; ++a) {
    for (int s = 0; s < S; ++s) {
      p.transition[a].row(s) = dirichlet_row(S, spec.concentration, spec.sparsity, rng).transpose();
    }
    for (int s = 0; s < S; ++s) {
      p.observation[a].row(s) = dirichlet_row(Y, spec.concentration, spec.sparsity, rng).transpose();
    }
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      p.reward(s, a) = spec.reward_lo + (spec.reward_hi - spec.reward_lo) * rng.uniform();
    }
  }
  p.initial_state_dist = dirichlet_row(S, spec.concentration, 0.0, rng);
  require_valid(p);
  return p;
}

std::uint64_t suite_instance_seed(std::uint64_t base, int k) {
  std::uint64_t state = base ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1));
  return splitmix64(state);
}

}  // namespace rqlab
