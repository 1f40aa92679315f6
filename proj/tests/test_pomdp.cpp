#include "rqlab/instances.hpp"
#include "rqlab/pomdp.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>

using namespace rqlab;

namespace {

Pomdp coin_flip() {
  Pomdp p = Pomdp::zeros(2, 2, 1, 0.9);
  p.transition[0] << 0.5, 0.5, 0.5, 0.5;
  p.observation[0] << 1.0, 0.0, 0.0, 1.0;
  p.reward << 0.0, 1.0;
  p.initial_state_dist << 1.0, 0.0;
  return p;
}

}  // namespace

TEST(Pomdp, CanonicalInstancesValidate) {
  for (const auto& name : canonical_names()) {
    const Pomdp p = canonical_instance(name);
    EXPECT_TRUE(validate(p).ok()) << name;
  }
  EXPECT_THROW(canonical_instance("NoSuchInstance"), Error);
}

TEST(Pomdp, ValidateReportsBrokenRows) {
  Pomdp p = two_state_drift();
  p.transition[1](0, 0) += 0.01;
  p.observation[0](1, 1) = -0.2;
  p.observation[0](1, 0) = 1.2;
  const ValidationReport r = validate(p);
  ASSERT_EQ(r.violations.size(), 2u);
  bool saw_transition = false, saw_negative = false;
  for (const auto& v : r.violations) {
    if (v.tensor == "transition") {
      saw_transition = true;
      EXPECT_EQ(v.row, 0);
      EXPECT_EQ(v.action, 1);
      EXPECT_NEAR(v.sum, 1.01, 1e-12);
    }
    if (v.tensor == "observation") {
      saw_negative = true;
      EXPECT_EQ(v.row, 1);
    }
  }
  EXPECT_TRUE(saw_transition && saw_negative);
  EXPECT_THROW(require_valid(p), Error);

  Pomdp q = two_state_drift();
  q.discount = 1.0;
  EXPECT_FALSE(validate(q).ok());
}

TEST(Pomdp, StepFrequencyMatchesBinomial) {
  const Pomdp p = coin_flip();
  Rng rng(42);
  const int n = 1'000'000;
  long zeros = 0;
  for (int i = 0; i < n; ++i) zeros += step(p, 0, 0, rng).next_state == 0;
  // 4 sigma of Binomial(1e6, 0.5) is 0.002.
  EXPECT_NEAR(static_cast<double>(zeros) / n, 0.5, 0.003);
}

TEST(Pomdp, StepIsDeterministicInSeed) {
  const Pomdp p = two_state_drift();
  auto choose = [](int, Rng& r) { return static_cast<int>(r.uniform_int(2)); };
  const Trajectory a = rollout(p, 500, 9, choose);
  const Trajectory b = rollout(p, 500, 9, choose);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].observation, b.steps[i].observation);
    EXPECT_EQ(a.steps[i].action, b.steps[i].action);
    EXPECT_EQ(a.steps[i].state, b.steps[i].state);
  }
}

TEST(Pomdp, BeliefUpdateMatchesJointEnumeration) {
  const Pomdp p = two_state_drift(0.2, 0.9, 0.9);
  const Belief b = (Vector(2) << 0.3, 0.7).finished();
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y) {
      // Oracle: P(s', y' | b, a) summed over s, then normalised.
      Vector joint = Vector::Zero(2);
      for (int s = 0; s < 2; ++s) {
        for (int sp = 0; sp < 2; ++sp) {
          joint(sp) += b(s) * p.transition[a](s, sp) * p.observation[a](sp, y);
        }
      }
      const Belief got = belief_update(p, b, a, y);
      EXPECT_NEAR(got(0), joint(0) / joint.sum(), 1e-14);
      EXPECT_NEAR(got(1), joint(1) / joint.sum(), 1e-14);
      EXPECT_NEAR(observation_distribution(p, b, a)(y), joint.sum(), 1e-14);
    }
  }
}

TEST(Pomdp, ZeroProbabilityObservationThrows) {
  const Pomdp p = coin_flip();
  Belief b = Vector::Zero(2);
  b(0) = 1.0;
  Pomdp q = p;
  q.transition[0] << 1.0, 0.0, 1.0, 0.0;
  EXPECT_THROW(belief_update(q, b, 0, 1), UnreachableHistory);
}

TEST(Pomdp, InitialBeliefUsesNullAction) {
  const Pomdp p = two_state_drift();
  const Belief b = initial_belief(p, 1);
  const double a = 0.5 * p.observation[kNullAction](0, 1);
  const double c = 0.5 * p.observation[kNullAction](1, 1);
  EXPECT_NEAR(b(0), a / (a + c), 1e-15);
}

TEST(Pomdp, JsonRoundTripIsExact) {
  for (const auto& name : canonical_names()) {
    const Pomdp p = canonical_instance(name);
    const Pomdp q = pomdp_from_json(to_json(p));
    ASSERT_EQ(q.n_states, p.n_states);
    for (int a = 0; a < p.n_actions; ++a) {
      EXPECT_EQ(q.transition[a], p.transition[a]);
      EXPECT_EQ(q.observation[a], p.observation[a]);
    }
    EXPECT_EQ(q.reward, p.reward);
    EXPECT_EQ(q.discount, p.discount);
    EXPECT_EQ(q.terminal, p.terminal);
  }
}

TEST(Pomdp, ShippedInstanceFilesMatchBuilders) {
  const std::filesystem::path dir = std::filesystem::path(RQLAB_SOURCE_DIR) / "data" / "instances";
  for (const auto& name : canonical_names()) {
    const Pomdp file = load_pomdp((dir / (name + ".json")).string());
    const Pomdp built = canonical_instance(name);
    EXPECT_EQ(to_json(file), to_json(built)) << name;
  }
}

TEST(Pomdp, MalformedJsonIsRejected) {
  nlohmann::json j = to_json(two_state_drift());
  j["transition"][0][0] = {0.5};
  EXPECT_THROW(pomdp_from_json(j), Error);
}
