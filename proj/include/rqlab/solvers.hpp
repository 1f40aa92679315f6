#pragma once

#include "rqlab/agent_state.hpp"
#include "rqlab/chain.hpp"
#include "rqlab/pomdp.hpp"
#include "rqlab/types.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace rqlab {

/// Real table over Z x A with its reachable mask.
struct QTable {
  Matrix q;
  Mask reachable;
  /// Certified bound on ||q - fixed point||_inf (0 when not applicable).
  double certified_error = 0.0;
  long iterations = 0;

  int n_z() const { return static_cast<int>(q.rows()); }
  int n_actions() const { return static_cast<int>(q.cols()); }
  Vector greedy_value() const { return q.rowwise().maxCoeff(); }
  int greedy_action(int z) const { return argmax_lowest(q.row(z)); }
  std::vector<int> greedy_policy() const;
};

/// Sup-norm of (a - b) restricted to reachable entries of `mask`.
double reachable_sup_norm(const Matrix& a, const Matrix& b, const Mask& mask);

/// One application of Q <- r + gamma * P max_a' Q on an agent-state model
/// with P stored as rows z * |A| + a.
Matrix bellman_operator(const Matrix& reward, const Matrix& transition, double gamma,
                        const Matrix& q);

/// Value iteration for Q*_xi stopped when the sup-norm residual drops below
/// tol * (1 - gamma) / (2 gamma), so ||Q - Q*_xi||_inf <= tol.
QTable solve_q_xi(const StationaryModel& sm, double gamma, double tol = 1e-10);

/// Same iteration for an arbitrary agent-state model (r, P).
QTable solve_agent_model(const Matrix& reward, const Matrix& transition, double gamma,
                         double tol = 1e-10);

/// Q* of the fully observed MDP underlying `p` (|S| x |A|).
Matrix solve_mdp(const Pomdp& p, double tol = 1e-12);

/// Optimal discounted episodic values: terminal states absorb with zero reward.
Vector solve_episodic_mdp(const Pomdp& p, double tol = 1e-12);

/// Exact value W(s, z) of running the deterministic agent-state policy
/// `actions` (indexed by z) from latent state s with agent state z.
/// The history value is V(h_t) = sum_s b_{h_t}(s) W(s, sigma_t(h_t)).
Matrix evaluate_agent_policy(const Pomdp& p, const AgentStateMachine& m,
                             const std::vector<int>& actions);

/// Interval for the infinite-horizon value given a finite
/// horizon value v_fin at time t with horizon T.
Interval sandwich_interval(double v_fin, int t, int horizon, const Pomdp& p);

struct HistoryDpOptions {
  /// Depth up to which per-history values are stored (default: horizon).
  int store_depth = -1;
  /// Maximum number of distinct (belief, steps-to-go) evaluations.
  long work_cap = 200'000'000;
  /// Maximum number of memoised (belief, steps-to-go) entries.
  long memo_cap = 4'000'000;
};

/// Finite-horizon values on the history tree for horizon T:
/// Q*_{t,T}(h, a), V*_{t,T}(h) and optionally V^pi_{t,T}(h) for
/// pi_t(h_t) = policy(sigma_t(h_t)).
struct HistoryValueTable {
  int horizon = 0;
  HistoryTree tree;
  Matrix q_star;   // nodes x |A|
  Vector v_star;   // nodes
  Vector v_policy; // nodes (empty without a policy)
  long evaluations = 0;

  /// Width gamma^{T-t} (r_MAX - r_MIN) / (1 - gamma) of the sandwich at depth t.
  double slack(int t, const Pomdp& p) const;
};

/// Backward induction over histories. Nodes up to store_depth are stored
/// explicitly; deeper layers are evaluated depth-first, reusing results for
/// bitwise-identical beliefs (values depend on h only through the belief and,
/// for V^pi, the agent state).
HistoryValueTable solve_history_dp(const Pomdp& p, const AgentStateMachine& m, int horizon,
                                   const std::optional<std::vector<int>>& policy = std::nullopt,
                                   const HistoryDpOptions& opts = {});

}  // namespace rqlab
