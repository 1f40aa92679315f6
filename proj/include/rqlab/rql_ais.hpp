#pragma once

#include "rqlab/agent_state.hpp"
#include "rqlab/chain.hpp"
#include "rqlab/pomdp.hpp"
#include "rqlab/replay.hpp"
#include "rqlab/solvers.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace rqlab {

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double decay = 400'000.0;

  /// end + (start - end) exp(-t / decay)
  double operator()(long t) const;
};

/// Reward predictor and observation-predictor logits over Z x A.
struct AisParameters {
  Matrix r_hat;       // |Z| x |A|
  Matrix obs_logits;  // rows z * |A| + a, cols y
  double lambda = 0.5;

  static AisParameters zeros(int n_z, int n_actions, int n_obs, double lambda);
  /// Softmax of every logit row.
  Matrix observation_predictor() const;
  int n_actions() const { return static_cast<int>(r_hat.cols()); }
};

/// One training sample extracted from a replayed sequence.
struct AisSample {
  int z = 0;
  int a = 0;
  double reward = 0.0;
  int next_observation = 0;
  double weight = 1.0;
};

struct AisLoss {
  double total = 0.0;
  double reward = 0.0;       // mean weighted squared reward error
  double observation = 0.0;  // mean weighted (M - 2 e_y)' M
};

struct AisGradient {
  Matrix r_hat;
  Matrix obs_logits;
};

/// L = (1/N) sum_i w_i [lambda (R_i - r(z_i, a_i))^2 + (1 - lambda)(M_i - 2 e_{y_i})' M_i]
/// with M_i = softmax(obs_logits row (z_i, a_i)).
AisLoss ais_loss(const AisParameters& params, const std::vector<AisSample>& samples);
AisGradient ais_gradient(const AisParameters& params, const std::vector<AisSample>& samples);
/// Gradient step; observation logits are left untouched when lambda == 1.
/// Throws Error when the loss is not finite.
AisLoss ais_update(AisParameters& params, const std::vector<AisSample>& samples, double lr);

/// Agent states z_1..z_L of the main segment, folded from the stored initial
/// state through the burn-in.
std::vector<int> burn_in_unroll(const ReplaySequence& seq, const AgentStateMachine& m);

/// Adam moments for the AIS parameters (dense updates, bias corrected).
struct AisAdam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long steps = 0;
  AisGradient m, v;

  /// Applies one step; observation logits are left untouched when lambda == 1.
  AisLoss update(AisParameters& params, const std::vector<AisSample>& samples);
};

enum class AisOptimizer { Adam, Sgd };
AisOptimizer parse_ais_optimizer(const std::string& name);

struct NStepOptions {
  int n = 5;
  double gamma = 0.99;
  double lr = 0.1;
};

/// n-step double-Q target for main step k of a sequence whose main agent
/// states are `zs`: sum_{j<n'} gamma^j R_{k+j} + gamma^{n'} Q_target(z', argmax Q(z', .)),
/// truncated at the sequence end (bootstrapping from the state after the last
/// step) and without bootstrap after a terminal transition.
double nstep_target(const ReplaySequence& seq, const std::vector<int>& zs, int k,
                    const AgentStateMachine& m, const Matrix& q, const Matrix& q_target,
                    const NStepOptions& opts);

struct NStepResult {
  std::vector<double> mean_abs_td;  // per batch entry
  long updates = 0;
};

/// Targets from a snapshot of q, then Q(z, a) += lr w (target - Q(z, a)) for
/// every main step in batch order.
NStepResult nstep_q_update(const std::vector<const ReplaySequence*>& batch,
                           const std::vector<std::vector<int>>& states,
                           const std::vector<double>& weights, const AgentStateMachine& m, Matrix& q,
                           const Matrix& q_target, const NStepOptions& opts);

struct RqlAisConfig {
  long total_steps = 200'000;
  int max_episode_length = 50;
  int sequence_length = 10;  // L
  int burn_in = 50;          // B
  int nstep = 5;
  int batch_size = 256;
  int update_every = 10;     // environment steps between learning updates
  int target_sync = 100;     // learning updates between target syncs
  long learning_starts = 1'000;
  std::size_t buffer_capacity = 10'000;
  double gamma = 0.99;
  double lambda = 0.5;
  double q_lr = 0.1;
  AisOptimizer ais_optimizer = AisOptimizer::Adam;
  double ais_lr = 1e-3;
  bool prioritized = true;
  double per_alpha = 0.6;
  double per_beta_start = 0.4;
  double per_beta_end = 1.0;
  double priority_epsilon = 1e-6;
  EpsilonSchedule epsilon;
  long eval_every = 10'000;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
};

struct AisLogRow {
  long step = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double reward_loss = 0.0;
  double observation_loss = 0.0;
  double epsilon = 0.0;
  std::size_t buffer_size = 0;
  double delta_tilde = 0.0;  // TV, max over depths 1..3
};

struct RqlAisRun {
  Matrix q;
  AisParameters ais;
  std::vector<AisLogRow> log;
  long updates = 0;
  long episodes = 0;
  long burn_in_checks = 0;  // sequences whose reconstruction was verified
  /// Samples per (z, a) seen by the AIS loss (rows z, cols a).
  Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic> sample_counts;
  double final_return = 0.0;
  double loss_return_correlation = 0.0;
};

/// Greedy evaluation: mean and std of discounted episodic return.
std::pair<double, double> evaluate_greedy(const Pomdp& p, const AgentStateMachine& m,
                                          const Matrix& q, int episodes, int max_length,
                                          double gamma, Rng& rng);

RqlAisRun train_rql_ais(const Pomdp& p, const AgentStateMachine& m, const RqlAisConfig& cfg);

nlohmann::json to_json(const RqlAisRun& run);

}  // namespace rqlab
