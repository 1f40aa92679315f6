#pragma once

#include "rqlab/agent_state.hpp"
#include "rqlab/belief_bounds.hpp"
#include "rqlab/chain.hpp"
#include "rqlab/ipm.hpp"
#include "rqlab/pomdp.hpp"
#include "rqlab/solvers.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rqlab {

/// Per-depth maxima, index t - 1.
struct ErrorProfile {
  std::vector<double> epsilon;
  std::vector<double> delta;
  /// Same maxima restricted to histories whose (sigma_t(h), a) is xi-reachable.
  std::vector<double> epsilon_reachable;
  std::vector<double> delta_reachable;
  std::vector<long> histories;

  int depth() const { return static_cast<int>(epsilon.size()); }
};

/// P(Z_{t+1} = . | h_t, a_t) from the belief: sum over (s, s', y') of
/// b(s) P(s'|s,a) O(y'|s',a) 1{z' = f(sigma_t(h), y', a)}.
Vector next_agent_state_law(const Pomdp& p, const AgentStateMachine& m, const Belief& b, int z,
                            int a);

/// eps_t and delta_t over every node of `tree` (all depths it holds).
ErrorProfile epsilon_delta_profile(const HistoryTree& tree, const Pomdp& p,
                                   const AgentStateMachine& m, const StationaryModel& sm,
                                   const IpmSpec& spec);
ErrorProfile epsilon_delta_profile(const Pomdp& p, const AgentStateMachine& m,
                                   const StationaryModel& sm, const IpmSpec& spec, int t_max);

/// Max over histories of d(P(Y_{t+1} | h, a), predictor row (sigma(h), a)),
/// with `predictor` stored as rows z * |A| + a over Y.
std::vector<double> delta_tilde_profile(const HistoryTree& tree, const Pomdp& p,
                                        const Matrix& predictor, const IpmSpec& spec);
std::vector<double> delta_tilde_profile(const Pomdp& p, const AgentStateMachine& m,
                                        const Matrix& predictor, const IpmSpec& spec, int t_max);

struct Aggregate {
  std::vector<double> bar;  // discounted tail sums, certified upper bounds
  std::vector<double> sup;  // max(window max from t on, tail)
};

/// bar_t = (1 - g) sum_{tau = t}^{T} g^{tau - t} v_tau + g^{T - t + 1} tail for
/// t = 1..T (T = values.size()), and sup_t = max(max_{tau >= t} v_tau, tail).
Aggregate aggregate(const std::vector<double>& values, double gamma, double tail);
/// Same, evaluated at t = 1..t_out (values past the window use the tail).
Aggregate aggregate(const std::vector<double>& values, double gamma, double tail, int t_out);

struct RhoBound {
  bool applicable = false;
  double value = 0.0;
  double lipschitz_reward = 0.0;
  double lipschitz_transition = 0.0;
  std::string note;
};

/// TV: span(r) / (1 - gamma). Wasserstein: L_r / (1 - gamma L_P) with
/// L_r = Lip(r_xi) and L_P = Lip(P_xi) under the IPM's ground metric on Z.
RhoBound instance_independent_rho(const IpmSpec& spec, const Pomdp& p, const StationaryModel& sm,
                                  double gamma);

enum class Verdict { Certified, Violated, Inconclusive };
std::string to_string(Verdict v);

struct BoundCheck {
  std::string kind;  // "Q", "V" or "policy"
  int depth = 0;
  int node = 0;
  int agent_state = 0;
  int action = -1;
  bool gated = true;  // false for histories whose sigma is not xi-reachable
  Interval lhs;       // interval for the left-hand side quantity
  double rhs = 0.0;
  double worst = 0.0; // worst-case LHS over the interval
  Verdict verdict = Verdict::Inconclusive;
  std::string history;
};

struct CheckTally {
  long certified = 0, violated = 0, inconclusive = 0;
  long total() const { return certified + violated + inconclusive; }
};

struct BoundCertificate {
  IpmKind kind = IpmKind::TotalVariation;
  double gamma = 0.0;
  int t_cert = 0;
  ErrorProfile profile;
  double epsilon_tail = 0.0;
  double delta_tail = 0.0;
  Aggregate epsilon_agg;  // t = 1..t_cert
  Aggregate delta_agg;
  double rho_value = 0.0;
  RhoBound rho_bound;
  std::vector<double> rhs;  // index t - 1
  std::vector<double> worst_lhs;      // gated value checks, per depth
  std::vector<BoundCheck> checks;
  std::map<std::string, CheckTally> tally;         // gated checks by kind
  std::map<std::string, CheckTally> tally_ungated; // informational
  double worst_slack = 0.0;  // min over gated checks of (bound - worst LHS)
  std::map<std::string, std::string> conventions;

  bool all_certified() const;
};

struct CertifyOptions {
  int t_cert = 3;
  int t_dp = 40;
  /// Node budget for the eps/delta window and for the finite-horizon sandwich.
  long profile_budget = 200'000;
  long sandwich_budget = 200'000;
  /// Belief-bound refinement target and the inconclusive threshold, both as
  /// fractions of the per-depth right-hand side.
  double refine_fraction = 0.004;
  double inconclusive_fraction = 0.01;
  double slack = 1e-9;
  BeliefBoundOptions belief;
};

/// Everything certify() needs that does not depend on the IPM: history trees,
/// finite-horizon values, the induced-policy values and the belief bounds.
struct CertificationContext {
  const Pomdp* p = nullptr;
  const AgentStateMachine* m = nullptr;
  const StationaryModel* sm = nullptr;
  QTable q_xi;
  CertifyOptions opts;
  HistoryTree profile_tree;
  HistoryValueTable sandwich;  // horizon sandwich.horizon, stored to t_cert
  std::vector<int> induced_policy;
  Matrix policy_values;        // W(s, z)
  std::unique_ptr<BeliefBounds> bounds;
};

CertificationContext make_certification_context(const Pomdp& p, const AgentStateMachine& m,
                                                const StationaryModel& sm, const QTable& q_xi,
                                                const CertifyOptions& opts = {});

/// Checks |Q*_t - Q*_xi o sigma_t| <= RHS_t, the V analogue, and
/// V*_t - V^{pi~}_t <= 2 RHS_t for every enumerated history with t <= T_cert,
/// where RHS_t = (eps_bar_t + gamma delta_bar_t rho(V*_xi)) / (1 - gamma).
/// Throws Unsupported for MMD.
BoundCertificate certify(CertificationContext& ctx, const IpmSpec& spec);
BoundCertificate certify(const Pomdp& p, const AgentStateMachine& m, const StationaryModel& sm,
                         const QTable& q_xi, const IpmSpec& spec, const CertifyOptions& opts = {});

/// Largest depth d <= t_max whose complete tree has at most `budget` nodes
/// (at least min_depth, even when that exceeds the budget).
HistoryTree enumerate_within_budget(const Pomdp& p, const AgentStateMachine& m,
                                    const AgentPolicy& policy, int t_max, long budget,
                                    int min_depth = 1);

nlohmann::json to_json(const BoundCertificate& c, bool include_checks = true);
/// t, eps_t, delta_t, eps_bar_t, delta_bar_t, RHS, worst LHS, verdict.
std::string certificate_csv(const BoundCertificate& c);

}  // namespace rqlab
