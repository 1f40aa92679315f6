#pragma once

#include "rqlab/pomdp.hpp"
#include "rqlab/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace rqlab {

/// Deterministic finite recurrent agent state z_t = f(z_{t-1}, y_t, a_{t-1}).
struct AgentStateMachine {
  int n_z = 0;
  int n_obs = 0;
  int n_actions = 0;
  int initial_z = 0;
  /// f[z][y][a] flattened as (z * n_obs + y) * n_actions + a.
  std::vector<int> update;
  /// Optional ground metric on Z; the discrete metric is used when absent.
  std::optional<Matrix> metric;
  std::vector<std::string> labels;

  int next(int z, int y, int a) const {
    return update[(static_cast<std::size_t>(z) * n_obs + y) * n_actions + a];
  }
  Matrix metric_or_discrete() const;
  std::string label(int z) const;
};

/// Throws Error if entries are out of range or the metric breaks the axioms
/// (zero diagonal, symmetry, triangle inequality within 1e-9).
void require_valid(const AgentStateMachine& m);

/// Observable prefix h_t = (y_1, a_1, ..., a_{t-1}, y_t).
struct History {
  std::vector<int> observations;
  std::vector<int> actions;  // size observations.size() - 1, or 0 when empty

  int depth() const { return static_cast<int>(observations.size()); }
  std::string to_string() const;
};

/// sigma_t(h_t): left fold of f from z0 using kNullAction before y_1.
int unroll(const AgentStateMachine& m, const History& h);

inline constexpr long kDefaultStateCap = 1'000'000;

/// Machine whose state is the padded window of the last n observations and
/// n-1 actions. Level k in [0, n] holds windows with k observations; level 0
/// is the all-pad initial state.
AgentStateMachine frame_stack(int n, int n_obs, int n_actions, long cap = kDefaultStateCap);
AgentStateMachine frame_stack(int n, const Pomdp& p, long cap = kDefaultStateCap);

/// Window content of a frame-stack state (oldest first).
struct FrameWindow {
  std::vector<int> observations;
  std::vector<int> actions;
};
FrameWindow decode_frame_state(int z, int n, int n_obs, int n_actions);

/// True when z is a frame-stack state with a completely filled window.
bool frame_window_full(int z, int n, int n_obs, int n_actions);

/// Stochastic policy over agent states: row z is a distribution over actions.
using AgentPolicy = Matrix;

AgentPolicy uniform_policy(int n_z, int n_actions);
/// Deterministic policy table as a one-hot stochastic matrix.
AgentPolicy deterministic_policy(const std::vector<int>& actions, int n_actions);

struct HistoryNode {
  int depth = 0;          // t
  int parent = -1;        // node index, -1 at depth 1
  int action = -1;        // a_{t-1}, -1 at depth 1
  int observation = 0;    // y_t
  double probability = 0.0;
  Belief belief;          // P(S_t = . | h_t)
  int agent_state = 0;    // sigma_t(h_t)
};

/// All positive-probability histories up to a depth, stored breadth-first.
struct HistoryTree {
  int n_obs = 0;
  int n_actions = 0;
  int max_depth = 0;
  std::vector<HistoryNode> nodes;
  /// children[node * n_actions * n_obs + a * n_obs + y] -> node index or -1.
  std::vector<int> children;
  /// Nodes of depth t occupy [depth_begin[t-1], depth_begin[t]).
  std::vector<int> depth_begin;

  int child(int node, int a, int y) const {
    return children[(static_cast<std::size_t>(node) * n_actions + a) * n_obs + y];
  }
  int begin(int t) const { return depth_begin[t - 1]; }
  int end(int t) const { return depth_begin[t]; }
  History history(int node) const;
};

/// Materialises every history with positive probability under `policy` up to
/// depth t_max. Throws SizeError naming the depth at which `cap` is exceeded.
HistoryTree enumerate_histories(const Pomdp& p, const AgentStateMachine& m,
                                const AgentPolicy& policy, int t_max,
                                long cap = kDefaultStateCap);

/// Number of nodes enumerate_histories would create if every branch had
/// positive probability.
double history_count_upper_bound(int n_obs, int n_actions, int t_max);

nlohmann::json to_json(const AgentStateMachine& m);
AgentStateMachine machine_from_json(const nlohmann::json& j);
AgentStateMachine load_machine(const std::string& path);

}  // namespace rqlab
