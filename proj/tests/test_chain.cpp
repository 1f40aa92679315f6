#include "rqlab/chain.hpp"
#include "rqlab/instances.hpp"

#include <gtest/gtest.h>

using namespace rqlab;

namespace {

struct Fixture {
  Pomdp p = two_state_drift(0.2, 0.9, 0.9);
  AgentStateMachine m = frame_stack(2, p);
  AgentPolicy pi = uniform_policy(m.n_z, p.n_actions);
};

// K(x, x') = P(s'|s,a) O(y'|s',a) 1{z' = f(z, y', a)} pi(a'|z').
double kernel_oracle(const Fixture& f, const JointSpace& sp, long from, long to) {
  const auto u = sp.decode(from);
  const auto v = sp.decode(to);
  if (v.z != f.m.next(u.z, v.y, u.a)) return 0.0;
  return f.p.transition[u.a](u.s, v.s) * f.p.observation[u.a](v.s, v.y) * f.pi(v.z, v.a);
}

}  // namespace

TEST(JointKernel, EntriesMatchFactoredProduct) {
  Fixture f;
  const JointKernel k = build_joint_kernel(f.p, f.m, f.pi);
  const Matrix dense = Matrix(k.kernel);
  const long n = k.space.size();
  ASSERT_EQ(n, 2L * 2 * 11 * 2);
  for (long x = 0; x < n; ++x) {
    EXPECT_NEAR(dense.row(x).sum(), 1.0, 1e-12);
    for (long xp = 0; xp < n; ++xp) {
      const double want = kernel_oracle(f, k.space, x, xp);
      EXPECT_NEAR(dense(x, xp), want, 1e-15);
      EXPECT_NEAR(joint_kernel_entry(f.p, f.m, f.pi, k.space, x, xp), want, 1e-15);
    }
  }
}

TEST(Stationary, MatchesDirectLinearSolve) {
  Fixture f;
  const JointKernel k = build_joint_kernel(f.p, f.m, f.pi);
  const long n = k.space.size();
  Matrix lhs(n + 1, n);
  lhs.topRows(n) = Matrix(k.kernel).transpose() - Matrix::Identity(n, n);
  lhs.row(n).setOnes();
  Vector rhs = Vector::Zero(n + 1);
  rhs(n) = 1.0;
  const Vector oracle = lhs.colPivHouseholderQr().solve(rhs);

  const StationaryModel sm = analyze(f.p, f.m, f.pi);
  EXPECT_LT((sm.xi - oracle).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(sm.xi.sum(), 1.0, 1e-12);
  EXPECT_TRUE(sm.unique);
  EXPECT_LT(sm.convergence_residual, 1e-10);
}

TEST(Stationary, InducedModelMatchesTripleSum) {
  Fixture f;
  const StationaryModel sm = analyze(f.p, f.m, f.pi);
  const JointSpace& sp = sm.space;
  const int S = f.p.n_states, Y = f.p.n_obs, Z = f.m.n_z, A = f.p.n_actions;
  for (int z = 0; z < Z; ++z) {
    for (int a = 0; a < A; ++a) {
      Vector post = Vector::Zero(S);
      for (int s = 0; s < S; ++s)
        for (int y = 0; y < Y; ++y) post(s) += sm.xi(sp.index(s, y, z, a));
      const double mass = post.sum();
      EXPECT_NEAR(sm.xi_za(z, a), mass, 1e-15);
      EXPECT_EQ(sm.reachable(z, a), mass > 1e-12);
      if (!sm.reachable(z, a)) continue;
      post /= mass;
      Vector pz = Vector::Zero(Z), py = Vector::Zero(Y);
      double r = 0.0;
      for (int s = 0; s < S; ++s) {
        r += post(s) * f.p.reward(s, a);
        for (int sp2 = 0; sp2 < S; ++sp2)
          for (int yp = 0; yp < Y; ++yp) {
            const double w = post(s) * f.p.transition[a](s, sp2) * f.p.observation[a](sp2, yp);
            pz(f.m.next(z, yp, a)) += w;
            py(yp) += w;
          }
      }
      EXPECT_NEAR(sm.r_xi(z, a), r, 1e-12);
      EXPECT_LT((sm.p_xi.row(sm.row(z, a)).transpose() - pz).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((sm.obs_predictor.row(sm.row(z, a)).transpose() - py).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((sm.state_posterior(z, a) - post).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Stationary, CompletedRowsAreStochastic) {
  Fixture f;
  const StationaryModel sm = analyze(f.p, f.m, f.pi);
  for (long r = 0; r < sm.p_xi.rows(); ++r) EXPECT_NEAR(sm.p_xi.row(r).sum(), 1.0, 1e-12);
  // The pad state and the partial windows are transient.
  EXPECT_FALSE(sm.reachable.row(f.m.initial_z).any());
  EXPECT_FALSE(sm.positivity_ok);
}

TEST(Stationary, ReducibleChainIsFlagged) {
  Pomdp p = Pomdp::zeros(2, 2, 1, 0.9);
  p.transition[0].setIdentity();
  p.observation[0].setIdentity();
  p.reward << 0.0, 1.0;
  p.initial_state_dist << 0.5, 0.5;
  const AgentStateMachine m = frame_stack(1, p);
  const StationaryModel sm = analyze(p, m, uniform_policy(m.n_z, 1));
  EXPECT_FALSE(sm.unique);
  EXPECT_FALSE(sm.notes.empty());
}

TEST(Stationary, FullyObservedWindowIsPositive) {
  const Pomdp p = fully_observed3();
  const AgentStateMachine m = frame_stack(1, p);
  const StationaryModel sm = analyze(p, m, uniform_policy(m.n_z, p.n_actions));
  EXPECT_TRUE(sm.unique);
  for (int z = 1; z < m.n_z; ++z)
    for (int a = 0; a < p.n_actions; ++a) EXPECT_TRUE(sm.reachable(z, a));
}
