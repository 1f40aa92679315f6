#include "rqlab/agent_state.hpp"
#include "rqlab/instances.hpp"
#include "rqlab/ipm.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <set>

using namespace rqlab;

namespace {

// Window of the last n observations and the n - 1 actions between them,
// read straight off the history.
FrameWindow window_of(const History& h, int n) {
  FrameWindow w;
  const int t = h.depth();
  const int first = std::max(0, t - n);
  for (int i = first; i < t; ++i) {
    w.observations.push_back(h.observations[i]);
    if (i > first) w.actions.push_back(h.actions[i - 1]);
  }
  return w;
}

std::vector<History> all_histories(int depth, int n_obs, int n_actions) {
  std::vector<History> out;
  std::vector<History> layer;
  for (int y = 0; y < n_obs; ++y) layer.push_back({{y}, {}});
  for (int t = 1; t <= depth; ++t) {
    out.insert(out.end(), layer.begin(), layer.end());
    if (t == depth) break;
    std::vector<History> next;
    for (const History& h : layer) {
      for (int a = 0; a < n_actions; ++a) {
        for (int y = 0; y < n_obs; ++y) {
          History g = h;
          g.actions.push_back(a);
          g.observations.push_back(y);
          next.push_back(g);
        }
      }
    }
    layer = std::move(next);
  }
  return out;
}

}  // namespace

TEST(FrameStack, StateCountIncludesPadLevels) {
  EXPECT_EQ(frame_stack(2, 2, 2).n_z, 11);  // pad, 2 single windows, 8 full windows
  EXPECT_EQ(frame_stack(1, 3, 2).n_z, 4);
  EXPECT_EQ(frame_stack(3, 2, 2).n_z, 1 + 2 + 8 + 32);
}

TEST(FrameStack, EncodingMatchesDirectWindow) {
  for (int n = 1; n <= 3; ++n) {
    const AgentStateMachine m = frame_stack(n, 2, 2);
    std::map<std::pair<std::vector<int>, std::vector<int>>, int> seen;
    for (const History& h : all_histories(5, 2, 2)) {
      const int z = unroll(m, h);
      const FrameWindow got = decode_frame_state(z, n, 2, 2);
      const FrameWindow want = window_of(h, n);
      EXPECT_EQ(got.observations, want.observations) << h.to_string();
      EXPECT_EQ(got.actions, want.actions) << h.to_string();
      // Same window <=> same state.
      const auto key = std::make_pair(want.observations, want.actions);
      auto [it, inserted] = seen.emplace(key, z);
      if (!inserted) {
        EXPECT_EQ(it->second, z);
      }
      EXPECT_EQ(frame_window_full(z, n, 2, 2), h.depth() >= n);
    }
    // Every state except the pad is hit by some history.
    EXPECT_EQ(static_cast<int>(seen.size()), m.n_z - 1);
  }
}

TEST(FrameStack, ThreeStepExample) {
  const AgentStateMachine m = frame_stack(2, 2, 2);
  const History h{{1, 0}, {1}};
  const FrameWindow w = decode_frame_state(unroll(m, h), 2, 2, 2);
  EXPECT_EQ(w.observations, (std::vector<int>{1, 0}));
  EXPECT_EQ(w.actions, (std::vector<int>{1}));
  EXPECT_EQ(unroll(m, History{}), m.initial_z);
}

TEST(FrameStack, CapIsEnforced) {
  EXPECT_THROW(frame_stack(12, 3, 2, 1000), SizeError);
  EXPECT_THROW(frame_stack(0, 2, 2), Error);
}

TEST(Machine, ValidationRejectsBadTablesAndMetrics) {
  AgentStateMachine m = frame_stack(1, 2, 2);
  EXPECT_NO_THROW(require_valid(m));
  AgentStateMachine bad = m;
  bad.update[0] = 99;
  EXPECT_THROW(require_valid(bad), Error);

  AgentStateMachine metric = m;
  metric.metric = Matrix::Zero(3, 3);
  (*metric.metric)(0, 1) = (*metric.metric)(1, 0) = 1.0;
  (*metric.metric)(1, 2) = (*metric.metric)(2, 1) = 1.0;
  (*metric.metric)(0, 2) = (*metric.metric)(2, 0) = 3.0;  // triangle inequality fails
  EXPECT_THROW(require_valid(metric), Error);
}

TEST(Machine, JsonRoundTrip) {
  AgentStateMachine m = frame_stack(2, 2, 2);
  m.metric = discrete_metric(m.n_z);
  const AgentStateMachine r = machine_from_json(to_json(m));
  EXPECT_EQ(r.n_z, m.n_z);
  EXPECT_EQ(r.update, m.update);
  EXPECT_EQ(r.initial_z, m.initial_z);
  ASSERT_TRUE(r.metric.has_value());
  EXPECT_EQ(*r.metric, *m.metric);
}

TEST(HistoryTree, DepthProbabilitiesSumToOne) {
  const Pomdp p = two_state_drift();
  const AgentStateMachine m = frame_stack(2, p);
  const HistoryTree tree = enumerate_histories(p, m, uniform_policy(m.n_z, 2), 3);
  for (int t = 1; t <= 3; ++t) {
    double total = 0.0;
    for (int v = tree.begin(t); v < tree.end(t); ++v) total += tree.nodes[v].probability;
    EXPECT_NEAR(total, 1.0, 1e-9) << "depth " << t;
  }
}

TEST(HistoryTree, NodesCarryFilteredBeliefsAndStates) {
  const Pomdp p = two_state_drift();
  const AgentStateMachine m = frame_stack(2, p);
  const HistoryTree tree = enumerate_histories(p, m, uniform_policy(m.n_z, 2), 3);
  for (int v = 0; v < static_cast<int>(tree.nodes.size()); ++v) {
    const History h = tree.history(v);
    Belief b = initial_belief(p, h.observations[0]);
    for (std::size_t i = 1; i < h.observations.size(); ++i) b = belief_update(p, b, h.actions[i - 1], h.observations[i]);
    EXPECT_LT((b - tree.nodes[v].belief).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(tree.nodes[v].agent_state, unroll(m, h));
  }
}

TEST(HistoryTree, CapRaisesSizeError) {
  const Pomdp p = two_state_drift();
  const AgentStateMachine m = frame_stack(1, p);
  EXPECT_THROW(enumerate_histories(p, m, uniform_policy(m.n_z, 2), 12, 1000), SizeError);
  EXPECT_DOUBLE_EQ(history_count_upper_bound(2, 2, 3), 2 + 8 + 32);
}
