#pragma once

#include "rqlab/rng.hpp"
#include "rqlab/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace rqlab {

/// Finite POMDP <S, Y, A, P, O, r, gamma> with dense stochastic tensors.
///
/// Storage is action-major so that the per-action slices are plain matrices:
///   transition[a](s, s')  = P(s' | s, a)
///   observation[a](s', y) = O(y | s', a)
///   reward(s, a)          = r(s, a)
/// The first observation is drawn from observation[kNullAction].
///
/// `terminal` is optional episodic metadata: entering a terminal state ends
/// an episode for the episodic trainer. Continuing analyses ignore it and use
/// the transition rows as given (canonical episodic instances reset there).
struct Pomdp {
  int n_states = 0;
  int n_obs = 0;
  int n_actions = 0;
  std::vector<Matrix> transition;
  std::vector<Matrix> observation;
  Matrix reward;
  double discount = 0.0;
  Vector initial_state_dist;
  std::vector<bool> terminal;

  std::vector<std::string> state_labels;
  std::vector<std::string> obs_labels;
  std::vector<std::string> action_labels;

  double r_min() const { return reward.minCoeff(); }
  double r_max() const { return reward.maxCoeff(); }
  double reward_span() const { return r_max() - r_min(); }
  bool is_terminal(int s) const { return !terminal.empty() && terminal[s]; }

  /// Allocates zero tensors of the given shape.
  static Pomdp zeros(int n_states, int n_obs, int n_actions, double discount);
};

struct Violation {
  std::string tensor;  // "transition", "observation", "initial_state_dist", "discount", "shape"
  int row = -1;        // s (transition), s' (observation)
  int action = -1;
  double sum = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

inline constexpr double kProbabilityTolerance = 1e-12;

ValidationReport validate(const Pomdp& p, double tol = kProbabilityTolerance);

/// Throws Error listing the first violations when `p` is invalid.
void require_valid(const Pomdp& p);

struct StepResult {
  int next_state = 0;
  int observation = 0;
  double reward = 0.0;
};

/// Samples s' ~ P(.|s,a), y' ~ O(.|s',a) and returns R = r(s,a).
StepResult step(const Pomdp& p, int s, int a, Rng& rng);

struct InitialDraw {
  int state = 0;
  int observation = 0;
};

/// s1 ~ initial_state_dist, y1 ~ O(.|s1, kNullAction).
InitialDraw reset(const Pomdp& p, Rng& rng);

/// Posterior over s1 after the first observation.
Belief initial_belief(const Pomdp& p, int y1);

/// Predicted distribution over the next state: sum_s P(s'|s,a) b(s).
Belief predict(const Pomdp& p, const Belief& b, int a);

/// Probability vector over the next observation given (b, a).
Vector observation_distribution(const Pomdp& p, const Belief& b, int a);

/// Bayes filter step b'(s') ~ O(y'|s',a) sum_s P(s'|s,a) b(s).
/// Throws UnreachableHistory when y' has zero probability under (b, a).
Belief belief_update(const Pomdp& p, const Belief& b, int a, int y);

/// Expected immediate reward sum_s b(s) r(s, a).
inline double expected_reward(const Pomdp& p, const Belief& b, int a) {
  return b.dot(p.reward.col(a));
}

struct TrajectoryStep {
  int observation = 0;
  int action = 0;
  double reward = 0.0;
  int state = 0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::uint64_t seed = 0;
};

/// Continuing rollout; `choose(observation, rng)` picks the action.
template <typename Chooser>
Trajectory rollout(const Pomdp& p, int length, std::uint64_t seed, Chooser&& choose) {
  Trajectory traj;
  traj.seed = seed;
  Rng rng(seed);
  auto [s, y] = reset(p, rng);
  for (int t = 0; t < length; ++t) {
    const int a = choose(y, rng);
    const StepResult r = step(p, s, a, rng);
    traj.steps.push_back({y, a, r.reward, s});
    s = r.next_state;
    y = r.observation;
  }
  return traj;
}

nlohmann::json to_json(const Pomdp& p);
Pomdp pomdp_from_json(const nlohmann::json& j);
Pomdp load_pomdp(const std::string& path);
void save_pomdp(const Pomdp& p, const std::string& path);

}  // namespace rqlab
