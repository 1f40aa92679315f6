#pragma once

#include "rqlab/agent_state.hpp"
#include "rqlab/chain.hpp"
#include "rqlab/pomdp.hpp"
#include "rqlab/solvers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rqlab {

/// A3: alpha = 1 / (1 + N) with N the visits to (z, a) before this update.
/// A3': alpha = 1 / (1 + N)^power with power in (0.5, 1].
enum class RateMode { A3, A3Power };

RateMode parse_rate_mode(const std::string& name);
std::string to_string(RateMode mode);

double learning_rate(RateMode mode, long visits_before, double power = 1.0);

struct RqlOptions {
  long steps = 2'000'000;
  RateMode rate = RateMode::A3;
  double power = 0.8;
  /// Gap logging period (0: only at `checkpoints` and the end).
  long eval_every = 0;
  std::vector<long> checkpoints;
  std::uint64_t seed = 0;
  /// Keep per-transition sufficient statistics for w2_diagnostic.
  bool track_transitions = false;
  /// Abort when |Q| exceeds this multiple of max|r| / (1 - gamma).
  double divergence_factor = 10.0;
};

struct RqlCheckpoint {
  long step = 0;
  double gap = 0.0;            // reachable sup-norm distance to Q*_xi (NaN without it)
  double visited_fraction = 0.0;
};

struct RqlRun {
  QTable q;
  Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic> visits;  // Z x A
  long steps = 0;
  std::uint64_t seed = 0;
  std::vector<RqlCheckpoint> log;
  double q_min_seen = 0.0, q_max_seen = 0.0;

  // Sufficient statistics (track_transitions): rows z * |A| + a.
  Matrix transition_counts;  // cols z'
  Matrix reward_by_next;     // sum of R per (z, a, z')
  Vector reward_sq;          // sum of R^2 per (z, a)
};

/// Single continuing trajectory of tabular recurrent Q-learning under a fixed
/// exploration policy over agent states.
RqlRun rql_train(const Pomdp& p, const AgentStateMachine& m, const AgentPolicy& explore,
                 const RqlOptions& opts, const QTable* q_xi = nullptr);

/// Initial table: zero when r_MIN <= 0 <= r_MAX, else the reward midpoint / (1 - gamma).
double rql_initial_value(const Pomdp& p);

struct W2Diagnostic {
  Matrix mean;       // per (z, a): average of R - r_xi + gamma V(z') - gamma P_xi V
  Matrix std_error;  // empirical std / sqrt(N)
  Mask visited;
};

/// Empirical average of the martingale-difference noise along the run.
W2Diagnostic w2_diagnostic(const RqlRun& run, const QTable& q_xi, const StationaryModel& sm,
                           double gamma);

/// TV distance between empirical (z, a) visit frequencies and xi(z, a).
double visit_tv(const RqlRun& run, const StationaryModel& sm);

}  // namespace rqlab
