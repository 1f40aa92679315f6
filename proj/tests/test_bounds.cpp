#include "rqlab/bounds.hpp"
#include "rqlab/instances.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>

using namespace rqlab;

namespace {

struct Solved {
  Pomdp p;
  AgentStateMachine m;
  StationaryModel sm;
  QTable q;
  Solved(Pomdp pomdp, int n) : p(std::move(pomdp)), m(frame_stack(n, p)) {
    sm = analyze(p, m, uniform_policy(m.n_z, p.n_actions));
    q = solve_q_xi(sm, p.discount);
  }
};

// sum_{s, s', y'} b(s) P(s'|s,a) O(y'|s',a) 1{z' = f(z, y', a)}
Vector law_oracle(const Solved& s, const Belief& b, int z, int a) {
  Vector out = Vector::Zero(s.m.n_z);
  for (int x = 0; x < s.p.n_states; ++x)
    for (int xp = 0; xp < s.p.n_states; ++xp)
      for (int y = 0; y < s.p.n_obs; ++y)
        out(s.m.next(z, y, a)) += b(x) * s.p.transition[a](x, xp) * s.p.observation[a](xp, y);
  return out;
}

}  // namespace

TEST(Aggregate, DirectSummation) {
  const Aggregate agg = aggregate({0.1, 0.2, 0.3}, 0.9, 0.4);
  // (1 - g)(0.1 + g 0.2 + g^2 0.3) + g^3 0.4
  EXPECT_NEAR(agg.bar[0], 0.1 * (0.1 + 0.9 * 0.2 + 0.81 * 0.3) + 0.729 * 0.4, 1e-15);
  EXPECT_NEAR(agg.bar[0], 0.3439, 1e-12);
  EXPECT_NEAR(agg.bar[2], 0.1 * 0.3 + 0.9 * 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(agg.sup[0], 0.4);
  const Aggregate longer = aggregate({0.1, 0.2, 0.3}, 0.9, 0.4, 5);
  ASSERT_EQ(longer.bar.size(), 5u);
  EXPECT_NEAR(longer.bar[4], 0.4, 1e-15);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_DOUBLE_EQ(longer.bar[t], agg.bar[t]);
}

TEST(Rho, TotalVariationFormula) {
  Pomdp p = two_state_drift(0.2, 0.99);
  Solved s(p, 1);
  const RhoBound b = instance_independent_rho(IpmSpec::total_variation(s.m.n_z), s.p, s.sm, 0.99);
  ASSERT_TRUE(b.applicable);
  EXPECT_NEAR(b.value, 100.0, 1e-9);
}

TEST(Rho, BoundsDominateExactFunctionals) {
  for (int k = 0; k < 20; ++k) {
    RandomInstanceSpec spec;
    spec.seed = suite_instance_seed(7, k);
    for (int n : {1, 2}) {
      Solved s(generate_instance(spec), n);
      const Vector v = s.q.greedy_value();
      const IpmSpec tv = IpmSpec::total_variation(s.m.n_z);
      EXPECT_LE(rho(tv, v), instance_independent_rho(tv, s.p, s.sm, s.p.discount).value + 1e-9);
      const IpmSpec was = IpmSpec::wasserstein(s.m.metric_or_discrete());
      const RhoBound rb = instance_independent_rho(was, s.p, s.sm, s.p.discount);
      if (rb.applicable) {
        EXPECT_LE(rho(was, v), rb.value + 1e-9);
      }
    }
  }
}

TEST(Profile, MatchesPerHistoryRecomputation) {
  Solved s(two_state_drift(0.2, 0.9), 2);
  const HistoryTree tree = enumerate_histories(s.p, s.m, uniform_policy(s.m.n_z, 2), 4);
  for (const IpmSpec& spec : {IpmSpec::total_variation(s.m.n_z), IpmSpec::wasserstein_discrete(s.m.n_z)}) {
    const ErrorProfile prof = epsilon_delta_profile(tree, s.p, s.m, s.sm, spec);
    ASSERT_EQ(prof.depth(), 4);
    for (int t = 1; t <= 4; ++t) {
      double eps = 0, delta = 0, eps_r = 0, delta_r = 0;
      for (int v = tree.begin(t); v < tree.end(t); ++v) {
        const HistoryNode& node = tree.nodes[v];
        for (int a = 0; a < 2; ++a) {
          const Vector law = law_oracle(s, node.belief, node.agent_state, a);
          EXPECT_LT((next_agent_state_law(s.p, s.m, node.belief, node.agent_state, a) - law).cwiseAbs().maxCoeff(), 1e-15);
          const double e = std::abs(node.belief.dot(s.p.reward.col(a)) - s.sm.r_xi(node.agent_state, a));
          const double d = 0.5 * (law - s.sm.p_xi.row(s.sm.row(node.agent_state, a)).transpose()).cwiseAbs().sum();
          eps = std::max(eps, e);
          delta = std::max(delta, d);
          if (s.sm.reachable(node.agent_state, a)) {
            eps_r = std::max(eps_r, e);
            delta_r = std::max(delta_r, d);
          }
        }
      }
      EXPECT_NEAR(prof.epsilon[t - 1], eps, 1e-12);
      EXPECT_NEAR(prof.delta[t - 1], delta, 1e-12);
      EXPECT_NEAR(prof.epsilon_reachable[t - 1], eps_r, 1e-12);
      EXPECT_NEAR(prof.delta_reachable[t - 1], delta_r, 1e-12);
    }
  }
}

TEST(Profile, DeltaTildeMatchesPushforward) {
  Solved s(two_state_drift(0.2, 0.9), 2);
  const HistoryTree tree = enumerate_histories(s.p, s.m, uniform_policy(s.m.n_z, 2), 3);
  const IpmSpec tv = IpmSpec::total_variation(s.p.n_obs);
  const std::vector<double> dt = delta_tilde_profile(tree, s.p, s.sm.obs_predictor, tv);
  for (int t = 1; t <= 3; ++t) {
    double worst = 0;
    for (int v = tree.begin(t); v < tree.end(t); ++v) {
      const HistoryNode& node = tree.nodes[v];
      for (int a = 0; a < 2; ++a) {
        Vector py = Vector::Zero(2);
        for (int x = 0; x < 2; ++x)
          for (int xp = 0; xp < 2; ++xp)
            for (int y = 0; y < 2; ++y) py(y) += node.belief(x) * s.p.transition[a](x, xp) * s.p.observation[a](xp, y);
        worst = std::max(worst, total_variation(py, s.sm.obs_predictor.row(s.sm.row(node.agent_state, a)).transpose()));
      }
    }
    EXPECT_NEAR(dt[t - 1], worst, 1e-12);
  }
}

TEST(Profile, FullyObservedWindowIsExact) {
  Solved s(fully_observed3(), 1);
  const ErrorProfile prof =
      epsilon_delta_profile(s.p, s.m, s.sm, IpmSpec::total_variation(s.m.n_z), 4);
  for (int t = 1; t <= 4; ++t) {
    EXPECT_LE(prof.epsilon[t - 1], 1e-9);
    EXPECT_LE(prof.delta[t - 1], 1e-9);
  }
}

TEST(Profile, FullyObservedFiniteHorizonTracksAgentStateQ) {
  Solved s(fully_observed3(), 1);
  const int T = 8;
  const HistoryValueTable dp = solve_history_dp(s.p, s.m, T);
  for (int t = 1; t <= 4; ++t) {
    for (int v = dp.tree.begin(t); v < dp.tree.end(t); ++v) {
      const int z = dp.tree.nodes[v].agent_state;
      for (int a = 0; a < s.p.n_actions; ++a) {
        EXPECT_LE(std::abs(s.q.q(z, a) - dp.q_star(v, a)), dp.slack(t, s.p) + 1e-8);
      }
    }
  }
}

TEST(Certify, CanonicalInstanceIsCertified) {
  Solved s(two_state_drift(0.2, 0.9), 2);
  CertifyOptions opts;
  opts.t_cert = 3;
  opts.t_dp = 40;
  const BoundCertificate c = certify(s.p, s.m, s.sm, s.q, IpmSpec::total_variation(s.m.n_z), opts);
  EXPECT_TRUE(c.all_certified());
  EXPECT_GT(c.tally.at("Q").certified, 0);
  EXPECT_EQ(c.tally.at("Q").violated + c.tally.at("V").violated + c.tally.at("policy").violated, 0);

  // Right-hand sides from the profile.
  const Aggregate eps = aggregate(c.profile.epsilon, 0.9, s.p.reward_span(), 3);
  const Aggregate del = aggregate(c.profile.delta, 0.9, 1.0, 3);
  const double rho_v = span(s.q.greedy_value());
  EXPECT_NEAR(c.rho_value, rho_v, 1e-12);
  for (int t = 1; t <= 3; ++t) {
    EXPECT_NEAR(c.rhs[t - 1], (eps.bar[t - 1] + 0.9 * del.bar[t - 1] * rho_v) / 0.1, 1e-12);
  }

  // Worst slack from the individual checks.
  double slack = 1e300;
  for (const BoundCheck& ch : c.checks) {
    if (!ch.gated) continue;
    const double bound = ch.kind == "policy" ? 2.0 * c.rhs[ch.depth - 1] : c.rhs[ch.depth - 1];
    EXPECT_DOUBLE_EQ(ch.rhs, bound);
    slack = std::min(slack, bound - ch.lhs.hi);
  }
  EXPECT_DOUBLE_EQ(c.worst_slack, slack);
  EXPECT_GT(c.worst_slack, 0.0);

  // Every Q interval is consistent with an independent finite-horizon sandwich.
  const int T = 10;
  HistoryDpOptions dpo;
  dpo.store_depth = 3;
  const HistoryValueTable dp = solve_history_dp(s.p, s.m, T, std::nullopt, dpo);
  for (const BoundCheck& ch : c.checks) {
    if (ch.kind != "Q") continue;
    // Node indices agree: both trees are complete breadth-first enumerations.
    const Interval iv = sandwich_interval(dp.q_star(ch.node, ch.action), ch.depth, T, s.p);
    const double centre = s.q.q(ch.agent_state, ch.action);
    const double far = std::max(std::abs(iv.lo - centre), std::abs(iv.hi - centre));
    const double near = centre < iv.lo ? iv.lo - centre : (centre > iv.hi ? centre - iv.hi : 0.0);
    EXPECT_LE(ch.lhs.lo, far + 1e-9) << ch.history;
    EXPECT_LE(near, ch.lhs.hi + 1e-9) << ch.history;
  }

  const nlohmann::json j = to_json(c);
  EXPECT_TRUE(j.contains("conventions"));
  EXPECT_EQ(j["all_certified"], true);
  const std::string csv = certificate_csv(c);
  EXPECT_EQ(csv.rfind("t,epsilon,delta,epsilon_bar,delta_bar,rhs,worst_lhs,verdict\n", 0), 0u);
}

TEST(Certify, MmdIsUnsupported) {
  Solved s(two_state_drift(0.2, 0.9), 1);
  EXPECT_THROW(certify(s.p, s.m, s.sm, s.q, IpmSpec::mmd(s.m.n_z)), Unsupported);
}

TEST(Certify, BudgetedEnumerationRespectsBudget) {
  Solved s(two_state_drift(0.2, 0.9), 1);
  const HistoryTree tree = enumerate_within_budget(s.p, s.m, uniform_policy(s.m.n_z, 2), 40, 1000);
  EXPECT_LE(static_cast<long>(tree.nodes.size()), 1000);
  EXPECT_GT(history_count_upper_bound(2, 2, tree.max_depth + 1), 1000);
}
