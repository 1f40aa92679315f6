#include "rqlab/instances.hpp"
#include "rqlab/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>

using namespace rqlab;

namespace {

// Policy iteration on an agent-state model (rows z * |A| + a of P).
Matrix policy_iteration(const Matrix& r, const Matrix& P, double gamma) {
  const int Z = static_cast<int>(r.rows()), A = static_cast<int>(r.cols());
  std::vector<int> pi(Z, 0);
  Matrix q(Z, A);
  for (int iter = 0; iter < 1000; ++iter) {
    Matrix Ppi(Z, Z);
    Vector rpi(Z);
    for (int z = 0; z < Z; ++z) {
      Ppi.row(z) = P.row(static_cast<Eigen::Index>(z) * A + pi[z]);
      rpi(z) = r(z, pi[z]);
    }
    const Vector v = (Matrix::Identity(Z, Z) - gamma * Ppi).partialPivLu().solve(rpi);
    for (int z = 0; z < Z; ++z)
      for (int a = 0; a < A; ++a) q(z, a) = r(z, a) + gamma * P.row(static_cast<Eigen::Index>(z) * A + a).dot(v);
    bool stable = true;
    for (int z = 0; z < Z; ++z) {
      int best = pi[z];
      for (int a = 0; a < A; ++a)
        if (q(z, a) > q(z, best) + 1e-13) best = a;
      if (best != pi[z]) {
        pi[z] = best;
        stable = false;
      }
    }
    if (stable) return q;
  }
  ADD_FAILURE() << "policy iteration did not stabilise";
  return q;
}

// Unnormalised P(s_t = s, y_1..t | a_1..t-1), summing over every state path.
Vector path_weights(const Pomdp& p, const History& h) {
  const int S = p.n_states, t = h.depth();
  Vector w = Vector::Zero(S);
  std::vector<int> path(t, 0);
  std::function<void(int, double)> rec = [&](int i, double prob) {
    if (prob == 0.0) return;
    if (i == t) {
      w(path[t - 1]) += prob;
      return;
    }
    for (int s = 0; s < S; ++s) {
      path[i] = s;
      const double step = i == 0 ? p.initial_state_dist(s) * p.observation[kNullAction](s, h.observations[0])
                                 : p.transition[h.actions[i - 1]](path[i - 1], s) *
                                       p.observation[h.actions[i - 1]](s, h.observations[i]);
      rec(i + 1, prob * step);
    }
  };
  rec(0, 1.0);
  return w;
}

// P(h) V*_{t,T}(h) by backward induction over histories.
double scaled_value(const Pomdp& p, const History& h, int horizon) {
  if (h.depth() >= horizon) return 0.0;
  const Vector w = path_weights(p, h);
  double best = -1e300;
  for (int a = 0; a < p.n_actions; ++a) {
    double q = w.dot(p.reward.col(a));
    for (int y = 0; y < p.n_obs; ++y) {
      History g = h;
      g.actions.push_back(a);
      g.observations.push_back(y);
      q += p.discount * scaled_value(p, g, horizon);
    }
    best = std::max(best, q);
  }
  return best;
}

double oracle_q(const Pomdp& p, const History& h, int a, int horizon) {
  const Vector w = path_weights(p, h);
  double q = w.dot(p.reward.col(a));
  if (h.depth() + 1 < horizon) {
    for (int y = 0; y < p.n_obs; ++y) {
      History g = h;
      g.actions.push_back(a);
      g.observations.push_back(y);
      q += p.discount * scaled_value(p, g, horizon);
    }
  }
  return q / w.sum();
}

}  // namespace

TEST(ValueIteration, MatchesPolicyIteration) {
  for (const auto& name : canonical_names()) {
    const Pomdp p = canonical_instance(name);
    for (int n : {1, 2}) {
      const AgentStateMachine m = frame_stack(n, p);
      const StationaryModel sm = analyze(p, m, uniform_policy(m.n_z, p.n_actions));
      const QTable q = solve_q_xi(sm, p.discount, 1e-10);
      const Matrix oracle = policy_iteration(sm.r_xi, sm.p_xi, p.discount);
      EXPECT_LT((q.q - oracle).cwiseAbs().maxCoeff(), 1e-8) << name << " n=" << n;
      EXPECT_LE(q.certified_error, 1e-10);
    }
  }
}

TEST(ValueIteration, FixedPointResidual) {
  const Pomdp p = two_state_drift();
  const AgentStateMachine m = frame_stack(2, p);
  const StationaryModel sm = analyze(p, m, uniform_policy(m.n_z, 2));
  const QTable q = solve_q_xi(sm, p.discount, 1e-11);
  const Matrix tq = bellman_operator(sm.r_xi, sm.p_xi, p.discount, q.q);
  EXPECT_LT((tq - q.q).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(MdpSolver, MatchesPolicyIteration) {
  const Pomdp p = fully_observed3();
  Matrix P(p.n_states * p.n_actions, p.n_states);
  for (int s = 0; s < p.n_states; ++s)
    for (int a = 0; a < p.n_actions; ++a) P.row(s * p.n_actions + a) = p.transition[a].row(s);
  EXPECT_LT((solve_mdp(p) - policy_iteration(p.reward, P, p.discount)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MdpSolver, EpisodicCorridorValue) {
  const Pomdp p = sparse_corridor();
  const Vector v = solve_episodic_mdp(p);
  // Bellman check with absorbing zero-reward terminals.
  for (int s = 0; s < p.n_states; ++s) {
    if (p.is_terminal(s)) {
      EXPECT_EQ(v(s), 0.0);
      continue;
    }
    double best = -1e300;
    for (int a = 0; a < p.n_actions; ++a) {
      double q = p.reward(s, a);
      for (int sp = 0; sp < p.n_states; ++sp)
        if (!p.is_terminal(sp)) q += p.discount * p.transition[a](s, sp) * v(sp);
      best = std::max(best, q);
    }
    EXPECT_NEAR(v(s), best, 1e-10);
  }
  EXPECT_NEAR(p.initial_state_dist.dot(v), 0.963058, 5e-7);
}

TEST(HistoryDp, MatchesPathEnumeration) {
  const Pomdp p = two_state_drift(0.2, 0.9, 0.9);
  const AgentStateMachine m = frame_stack(2, p);
  const int horizon = 4;
  const HistoryValueTable table = solve_history_dp(p, m, horizon);
  for (int t = 1; t <= 3; ++t) {
    for (int v = table.tree.begin(t); v < table.tree.end(t); ++v) {
      const History h = table.tree.history(v);
      for (int a = 0; a < p.n_actions; ++a) {
        EXPECT_NEAR(table.q_star(v, a), oracle_q(p, h, a, horizon), 1e-12) << h.to_string();
      }
      EXPECT_NEAR(table.v_star(v), table.q_star.row(v).maxCoeff(), 0.0);
    }
  }
}

TEST(HistoryDp, MemoisedDeepLayersAgreeWithStoredTree) {
  const Pomdp p = fully_observed3();
  const AgentStateMachine m = frame_stack(1, p);
  HistoryDpOptions shallow;
  shallow.store_depth = 2;
  const HistoryValueTable a = solve_history_dp(p, m, 6, std::nullopt, shallow);
  const HistoryValueTable b = solve_history_dp(p, m, 6);
  for (int v = 0; v < a.tree.end(2); ++v) EXPECT_EQ(a.q_star.row(v), b.q_star.row(v));
}

TEST(Sandwich, WidthArithmetic) {
  Pomdp p = two_state_drift(0.2, 0.9);
  const Interval iv = sandwich_interval(0.0, 1, 11, p);
  EXPECT_NEAR(iv.width(), std::pow(0.9, 10) / 0.1, 1e-12);
  EXPECT_NEAR(iv.width(), 3.4867844, 1e-7);
  EXPECT_THROW(sandwich_interval(0.0, 5, 4, p), Error);
}

TEST(Sandwich, LongerHorizonFallsInside) {
  const Pomdp p = two_state_drift(0.2, 0.9);
  const AgentStateMachine m = frame_stack(1, p);
  const int T = 3;
  const HistoryValueTable shortdp = solve_history_dp(p, m, T);
  HistoryDpOptions opts;
  opts.store_depth = 3;
  const HistoryValueTable longdp = solve_history_dp(p, m, T + 10, std::nullopt, opts);
  for (int t = 1; t <= T; ++t) {
    for (int v = shortdp.tree.begin(t); v < shortdp.tree.end(t); ++v) {
      const Interval iv = sandwich_interval(shortdp.v_star(v), t, T, p);
      EXPECT_TRUE(iv.contains(longdp.v_star(v), 1e-9));
      for (int a = 0; a < p.n_actions; ++a) {
        EXPECT_TRUE(sandwich_interval(shortdp.q_star(v, a), t, T, p).contains(longdp.q_star(v, a), 1e-9));
      }
    }
  }
}

TEST(PolicyEvaluation, MatchesDenseLinearSolve) {
  const Pomdp p = two_state_drift(0.2, 0.5);
  const AgentStateMachine m = frame_stack(2, p);
  std::vector<int> actions(m.n_z);
  for (int z = 0; z < m.n_z; ++z) actions[z] = z % 2;
  const Matrix W = evaluate_agent_policy(p, m, actions);
  const int S = p.n_states, Z = m.n_z;
  Matrix M = Matrix::Identity(S * Z, S * Z);
  Vector r(S * Z);
  for (int s = 0; s < S; ++s)
    for (int z = 0; z < Z; ++z) {
      const int a = actions[z];
      r(s * Z + z) = p.reward(s, a);
      for (int sp = 0; sp < S; ++sp)
        for (int y = 0; y < p.n_obs; ++y)
          M(s * Z + z, sp * Z + m.next(z, y, a)) -= p.discount * p.transition[a](s, sp) * p.observation[a](sp, y);
    }
  const Vector w = M.fullPivLu().solve(r);
  for (int s = 0; s < S; ++s)
    for (int z = 0; z < Z; ++z) EXPECT_NEAR(W(s, z), w(s * Z + z), 1e-12);

  // Finite-horizon policy values approach b' W(., sigma(h)).
  HistoryDpOptions opts;
  opts.store_depth = 2;
  const HistoryValueTable dp = solve_history_dp(p, m, 14, actions, opts);
  for (int v = 0; v < dp.tree.end(2); ++v) {
    const auto& node = dp.tree.nodes[v];
    EXPECT_NEAR(dp.v_policy(v), node.belief.dot(W.col(node.agent_state)), dp.slack(node.depth, p) + 1e-12);
  }
}
