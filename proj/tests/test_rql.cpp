#include "rqlab/instances.hpp"
#include "rqlab/rql.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rqlab;

namespace {

struct Drift {
  Pomdp p = two_state_drift();
  AgentStateMachine m = frame_stack(2, p);
  AgentPolicy pi = uniform_policy(m.n_z, 2);
  StationaryModel sm = analyze(p, m, pi);
  QTable q_xi = solve_q_xi(sm, p.discount);
};

const Drift& drift() {
  static const Drift d;
  return d;
}

}  // namespace

TEST(Rates, A3Schedules) {
  EXPECT_DOUBLE_EQ(learning_rate(RateMode::A3, 0), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate(RateMode::A3, 3), 0.25);
  EXPECT_DOUBLE_EQ(learning_rate(RateMode::A3Power, 3, 0.5), 0.5);
  EXPECT_EQ(parse_rate_mode("a3"), RateMode::A3);
  EXPECT_THROW(parse_rate_mode("constant"), Error);
  // Robbins-Monro: sum alpha diverges, sum alpha^2 converges (power > 1/2).
  double s1 = 0, s2 = 0;
  for (long n = 0; n < 1'000'000; ++n) {
    const double a = learning_rate(RateMode::A3Power, n, 0.8);
    s1 += a;
    s2 += a * a;
  }
  EXPECT_GT(s1, 10.0);
  EXPECT_LT(s2, 4.0);
}

TEST(Rql, InitialValueConvention) {
  EXPECT_EQ(rql_initial_value(two_state_drift()), 0.0);
  Pomdp p = two_state_drift(0.2, 0.5);
  p.reward.array() += 1.0;  // rewards in [1, 2]
  EXPECT_DOUBLE_EQ(rql_initial_value(p), 1.5 / 0.5);
}

TEST(Rql, DeterministicInSeed) {
  const Drift& d = drift();
  RqlOptions o;
  o.steps = 20'000;
  o.seed = 11;
  const RqlRun a = rql_train(d.p, d.m, d.pi, o, &d.q_xi);
  const RqlRun b = rql_train(d.p, d.m, d.pi, o, &d.q_xi);
  EXPECT_EQ(a.q.q, b.q.q);
  EXPECT_TRUE((a.visits == b.visits).all());
  o.seed = 12;
  EXPECT_NE(rql_train(d.p, d.m, d.pi, o, &d.q_xi).q.q, a.q.q);
}

TEST(Rql, ConvergesTowardAgentStateFixedPoint) {
  const Drift& d = drift();
  RqlOptions o;
  o.steps = 2'000'000;
  o.checkpoints = {100'000, 2'000'000};
  o.seed = 1;
  const RqlRun run = rql_train(d.p, d.m, d.pi, o, &d.q_xi);
  ASSERT_EQ(run.log.size(), 2u);
  EXPECT_LT(run.log[1].gap, run.log[0].gap);
  EXPECT_LT(run.log[1].gap, 0.05 * d.p.reward_span() / (1.0 - d.p.discount));
  // Only xi-reachable pairs keep being visited; they are all visited.
  for (int z = 0; z < d.m.n_z; ++z)
    for (int a = 0; a < 2; ++a)
      if (d.sm.reachable(z, a)) {
        EXPECT_GT(run.visits(z, a), 1000);
      }
}

TEST(Rql, VisitFrequenciesApproachXi) {
  const Drift& d = drift();
  RqlOptions o;
  o.steps = 2'000'000;
  o.seed = 2;
  const RqlRun run = rql_train(d.p, d.m, d.pi, o, &d.q_xi);
  EXPECT_LE(visit_tv(run, d.sm), 0.02);
}

TEST(Rql, NoiseDiagnosticVanishesOnlyForTheRightXi) {
  const Drift& d = drift();
  RqlOptions o;
  o.steps = 2'000'000;
  o.seed = 3;
  o.track_transitions = true;
  const RqlRun run = rql_train(d.p, d.m, d.pi, o, &d.q_xi);
  const W2Diagnostic w = w2_diagnostic(run, d.q_xi, d.sm, d.p.discount);
  for (int z = 0; z < d.m.n_z; ++z)
    for (int a = 0; a < 2; ++a) {
      if (!d.sm.reachable(z, a)) continue;
      ASSERT_TRUE(w.visited(z, a));
      EXPECT_LT(std::abs(w.mean(z, a)), 3.0 * w.std_error(z, a)) << "z=" << z << " a=" << a;
    }

  // Negative control: xi of a model with noisier observations. (Biasing the
  // exploration policy is no control here: the state marginal stays uniform.)
  const StationaryModel wrong = analyze(two_state_drift(0.35), d.m, d.pi);
  const QTable q_wrong = solve_q_xi(wrong, d.p.discount);
  const W2Diagnostic bad = w2_diagnostic(run, q_wrong, wrong, d.p.discount);
  double worst = 0;
  for (int z = 0; z < d.m.n_z; ++z)
    for (int a = 0; a < 2; ++a)
      if (d.sm.reachable(z, a)) worst = std::max(worst, std::abs(bad.mean(z, a)) / bad.std_error(z, a));
  EXPECT_GT(worst, 10.0);
}

TEST(Rql, DiagnosticNeedsTracking) {
  const Drift& d = drift();
  RqlOptions o;
  o.steps = 100;
  const RqlRun run = rql_train(d.p, d.m, d.pi, o);
  EXPECT_THROW(w2_diagnostic(run, d.q_xi, d.sm, d.p.discount), Error);
}
