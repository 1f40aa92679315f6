#include "rqlab/agent_state.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rqlab {

Matrix AgentStateMachine::metric_or_discrete() const {
  if (metric) return *metric;
  Matrix d = Matrix::Ones(n_z, n_z);
  d.diagonal().setZero();
  return d;
}

std::string AgentStateMachine::label(int z) const {
  if (z >= 0 && z < static_cast<int>(labels.size())) return labels[z];
  return std::to_string(z);
}

void require_valid(const AgentStateMachine& m) {
  if (m.n_z <= 0 || m.n_obs <= 0 || m.n_actions <= 0) {
    throw Error("agent-state machine dimensions must be positive");
  }
  if (m.initial_z < 0 || m.initial_z >= m.n_z) throw Error("initial_z out of range");
  const std::size_t expected = static_cast<std::size_t>(m.n_z) * m.n_obs * m.n_actions;
  if (m.update.size() != expected) throw Error("update table has the wrong size");
  for (int z : m.update) {
    if (z < 0 || z >= m.n_z) throw Error("update table entry " + std::to_string(z) + " out of range");
  }
  if (!m.metric) return;
  const Matrix& d = *m.metric;
  if (d.rows() != m.n_z || d.cols() != m.n_z) throw Error("metric must be n_z x n_z");
  constexpr double tol = 1e-9;
  for (int i = 0; i < m.n_z; ++i) {
    if (std::abs(d(i, i)) > tol) throw Error("metric diagonal must be zero");
    for (int j = 0; j < m.n_z; ++j) {
      if (d(i, j) < -tol) throw Error("metric entries must be nonnegative");
      if (std::abs(d(i, j) - d(j, i)) > tol) throw Error("metric must be symmetric");
      for (int k = 0; k < m.n_z; ++k) {
        if (d(i, k) > d(i, j) + d(j, k) + tol) throw Error("metric violates the triangle inequality");
      }
    }
  }
}

std::string History::to_string() const {
  std::ostringstream out;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    if (k > 0) out << " a" << actions[k - 1] << ' ';
    out << 'y' << observations[k];
  }
  return out.str();
}

int unroll(const AgentStateMachine& m, const History& h) {
  if (!h.observations.empty() && h.actions.size() + 1 != h.observations.size()) {
    throw Error("history must interleave t observations with t-1 actions");
  }
  int z = m.initial_z;
  for (std::size_t k = 0; k < h.observations.size(); ++k) {
    const int a_prev = k == 0 ? kNullAction : h.actions[k - 1];
    const int y = h.observations[k];
    if (y < 0 || y >= m.n_obs || a_prev < 0 || a_prev >= m.n_actions) {
      throw std::out_of_range("history entry out of range at step " + std::to_string(k + 1));
    }
    z = m.next(z, y, a_prev);
  }
  return z;
}

// ---------------------------------------------------------------------------
// Frame stacking

namespace {

struct FrameLayout {
  int n, Y, A;
  std::vector<long> offset;  // offset[k] = first index of level k; offset[n+1] = |Z|

  FrameLayout(int n_, int Y_, int A_, long cap) : n(n_), Y(Y_), A(A_) {
    offset.assign(n + 2, 0);
    double total = 0.0;
    long count = 1;
    for (int k = 0; k <= n; ++k) {
      if (k == 1) count = Y;
      else if (k > 1) count *= static_cast<long>(Y) * A;
      offset[k] = static_cast<long>(total);
      total += static_cast<double>(count);
      if (total > static_cast<double>(cap)) {
        throw SizeError("frame_stack(" + std::to_string(n) + ") needs more than " +
                        std::to_string(cap) + " agent states");
      }
    }
    offset[n + 1] = static_cast<long>(total);
  }

  int level_of(int z) const {
    int k = 0;
    while (k < n && z >= offset[k + 1]) ++k;
    return k;
  }

  int encode(const FrameWindow& w) const {
    const int k = static_cast<int>(w.observations.size());
    if (k == 0) return 0;
    long idx = w.observations[0];
    for (int j = 1; j < k; ++j) idx = (idx * A + w.actions[j - 1]) * Y + w.observations[j];
    return static_cast<int>(offset[k] + idx);
  }

  FrameWindow decode(int z) const {
    FrameWindow w;
    const int k = level_of(z);
    if (k == 0) return w;
    long idx = z - offset[k];
    w.observations.assign(k, 0);
    w.actions.assign(k - 1, 0);
    for (int j = k - 1; j >= 1; --j) {
      w.observations[j] = static_cast<int>(idx % Y);
      idx /= Y;
      w.actions[j - 1] = static_cast<int>(idx % A);
      idx /= A;
    }
    w.observations[0] = static_cast<int>(idx);
    return w;
  }
};

}  // namespace

AgentStateMachine frame_stack(int n, int n_obs, int n_actions, long cap) {
  if (n < 1) throw Error("frame_stack window length must be at least 1");
  const FrameLayout layout(n, n_obs, n_actions, cap);
  AgentStateMachine m;
  m.n_z = static_cast<int>(layout.offset[n + 1]);
  m.n_obs = n_obs;
  m.n_actions = n_actions;
  m.initial_z = 0;
  m.update.resize(static_cast<std::size_t>(m.n_z) * n_obs * n_actions);
  m.labels.resize(m.n_z);
  for (int z = 0; z < m.n_z; ++z) {
    const FrameWindow w = layout.decode(z);
    std::ostringstream label;
    if (w.observations.empty()) label << "pad";
    for (std::size_t j = 0; j < w.observations.size(); ++j) {
      if (j > 0) label << ".a" << w.actions[j - 1] << '.';
      label << 'y' << w.observations[j];
    }
    m.labels[z] = label.str();
    for (int y = 0; y < n_obs; ++y) {
      for (int a = 0; a < n_actions; ++a) {
        FrameWindow next = w;
        if (!next.observations.empty()) next.actions.push_back(a);
        next.observations.push_back(y);
        if (static_cast<int>(next.observations.size()) > n) {
          next.observations.erase(next.observations.begin());
          next.actions.erase(next.actions.begin());
        }
        m.update[(static_cast<std::size_t>(z) * n_obs + y) * n_actions + a] = layout.encode(next);
      }
    }
  }
  return m;
}

AgentStateMachine frame_stack(int n, const Pomdp& p, long cap) {
  return frame_stack(n, p.n_obs, p.n_actions, cap);
}

FrameWindow decode_frame_state(int z, int n, int n_obs, int n_actions) {
  return FrameLayout(n, n_obs, n_actions, std::numeric_limits<long>::max()).decode(z);
}

bool frame_window_full(int z, int n, int n_obs, int n_actions) {
  const FrameLayout layout(n, n_obs, n_actions, std::numeric_limits<long>::max());
  return layout.level_of(z) == n;
}

AgentPolicy uniform_policy(int n_z, int n_actions) {
  return Matrix::Constant(n_z, n_actions, 1.0 / n_actions);
}

AgentPolicy deterministic_policy(const std::vector<int>& actions, int n_actions) {
  AgentPolicy pi = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t z = 0; z < actions.size(); ++z) pi(static_cast<Eigen::Index>(z), actions[z]) = 1.0;
  return pi;
}

// ---------------------------------------------------------------------------
// History enumeration

History HistoryTree::history(int node) const {
  History h;
  std::vector<int> chain;
  for (int v = node; v >= 0; v = nodes[v].parent) chain.push_back(v);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const HistoryNode& n = nodes[*it];
    if (n.parent >= 0) h.actions.push_back(n.action);
    h.observations.push_back(n.observation);
  }
  return h;
}

double history_count_upper_bound(int n_obs, int n_actions, int t_max) {
  double total = 0.0;
  double level = n_obs;
  for (int t = 1; t <= t_max; ++t) {
    total += level;
    level *= static_cast<double>(n_obs) * n_actions;
  }
  return total;
}

HistoryTree enumerate_histories(const Pomdp& p, const AgentStateMachine& m,
                                const AgentPolicy& policy, int t_max, long cap) {
  if (t_max < 1) throw Error("enumerate_histories needs t_max >= 1");
  if (m.n_obs != p.n_obs || m.n_actions != p.n_actions) {
    throw Error("agent-state machine and POMDP disagree on |Y| or |A|");
  }
  if (policy.rows() != m.n_z || policy.cols() != p.n_actions) {
    throw Error("policy must be |Z| x |A|");
  }
  HistoryTree tree;
  tree.n_obs = p.n_obs;
  tree.n_actions = p.n_actions;
  tree.max_depth = t_max;
  tree.depth_begin.push_back(0);

  auto add = [&](HistoryNode node) {
    if (static_cast<long>(tree.nodes.size()) >= cap) {
      throw SizeError("history enumeration exceeds cap " + std::to_string(cap) + " at depth " +
                      std::to_string(node.depth));
    }
    tree.nodes.push_back(std::move(node));
    return static_cast<int>(tree.nodes.size()) - 1;
  };

  const Vector first = p.observation[kNullAction].transpose() * p.initial_state_dist;
  for (int y = 0; y < p.n_obs; ++y) {
    if (!(first(y) > 0.0)) continue;
    HistoryNode node;
    node.depth = 1;
    node.observation = y;
    node.probability = first(y);
    node.belief = initial_belief(p, y);
    node.agent_state = m.next(m.initial_z, y, kNullAction);
    add(std::move(node));
  }
  tree.depth_begin.push_back(static_cast<int>(tree.nodes.size()));

  const std::size_t fanout = static_cast<std::size_t>(p.n_actions) * p.n_obs;
  for (int t = 1; t < t_max; ++t) {
    const int lo = tree.begin(t), hi = tree.end(t);
    tree.children.resize(static_cast<std::size_t>(hi) * fanout, -1);
    for (int v = lo; v < hi; ++v) {
      for (int a = 0; a < p.n_actions; ++a) {
        const double pa = policy(tree.nodes[v].agent_state, a);
        if (!(pa > 0.0)) continue;
        const Vector ydist = observation_distribution(p, tree.nodes[v].belief, a);
        for (int y = 0; y < p.n_obs; ++y) {
          if (!(ydist(y) > 0.0)) continue;
          HistoryNode node;
          node.depth = t + 1;
          node.parent = v;
          node.action = a;
          node.observation = y;
          node.probability = tree.nodes[v].probability * pa * ydist(y);
          node.belief = belief_update(p, tree.nodes[v].belief, a, y);
          node.agent_state = m.next(tree.nodes[v].agent_state, y, a);
          const int idx = add(std::move(node));
          tree.children[v * fanout + a * p.n_obs + y] = idx;
        }
      }
    }
    tree.depth_begin.push_back(static_cast<int>(tree.nodes.size()));
  }
  tree.children.resize(tree.nodes.size() * fanout, -1);
  return tree;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const AgentStateMachine& m) {
  nlohmann::json j;
  j["n_z"] = m.n_z;
  j["initial_z"] = m.initial_z;
  nlohmann::json upd = nlohmann::json::array();
  for (int z = 0; z < m.n_z; ++z) {
    nlohmann::json zy = nlohmann::json::array();
    for (int y = 0; y < m.n_obs; ++y) {
      nlohmann::json ya = nlohmann::json::array();
      for (int a = 0; a < m.n_actions; ++a) ya.push_back(m.next(z, y, a));
      zy.push_back(std::move(ya));
    }
    upd.push_back(std::move(zy));
  }
  j["update"] = std::move(upd);
  if (m.metric) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.n_z; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < m.n_z; ++k) row.push_back((*m.metric)(i, k));
      rows.push_back(std::move(row));
    }
    j["metric"] = std::move(rows);
  }
  if (!m.labels.empty()) j["labels"] = m.labels;
  return j;
}

AgentStateMachine machine_from_json(const nlohmann::json& j) {
  for (const char* key : {"n_z", "initial_z", "update"}) {
    if (!j.contains(key)) throw Error(std::string("machine file lacks key '") + key + "'");
  }
  AgentStateMachine m;
  m.n_z = j.at("n_z").get<int>();
  m.initial_z = j.at("initial_z").get<int>();
  const auto& upd = j.at("update");
  if (!upd.is_array() || upd.size() != static_cast<std::size_t>(m.n_z) || upd.empty() ||
      !upd[0].is_array() || upd[0].empty()) {
    throw Error("'update' must be a nested [z][y][a] array");
  }
  m.n_obs = static_cast<int>(upd[0].size());
  m.n_actions = static_cast<int>(upd[0][0].size());
  m.update.resize(static_cast<std::size_t>(m.n_z) * m.n_obs * m.n_actions);
  for (int z = 0; z < m.n_z; ++z) {
    if (upd[z].size() != static_cast<std::size_t>(m.n_obs)) throw Error("ragged 'update' array");
    for (int y = 0; y < m.n_obs; ++y) {
      if (upd[z][y].size() != static_cast<std::size_t>(m.n_actions)) throw Error("ragged 'update' array");
      for (int a = 0; a < m.n_actions; ++a) {
        m.update[(static_cast<std::size_t>(z) * m.n_obs + y) * m.n_actions + a] = upd[z][y][a].get<int>();
      }
    }
  }
  if (j.contains("metric")) {
    const auto& rows = j.at("metric");
    Matrix d(m.n_z, m.n_z);
    if (rows.size() != static_cast<std::size_t>(m.n_z)) throw Error("metric must be n_z x n_z");
    for (int i = 0; i < m.n_z; ++i) {
      if (rows[i].size() != static_cast<std::size_t>(m.n_z)) throw Error("metric must be n_z x n_z");
      for (int k = 0; k < m.n_z; ++k) d(i, k) = rows[i][k].get<double>();
    }
    m.metric = d;
  }
  if (j.contains("labels")) m.labels = j.at("labels").get<std::vector<std::string>>();
  require_valid(m);
  return m;
}

AgentStateMachine load_machine(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open machine file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed machine file '" + path + "': " + e.what());
  }
  return machine_from_json(j);
}

}  // namespace rqlab
