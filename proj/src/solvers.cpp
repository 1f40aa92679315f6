#include "rqlab/solvers.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <cstring>
#include <string>
#include <limits>
#include <unordered_map>

namespace rqlab {

std::vector<int> QTable::greedy_policy() const {
  std::vector<int> out(n_z());
  for (int z = 0; z < n_z(); ++z) out[z] = greedy_action(z);
  return out;
}

double reachable_sup_norm(const Matrix& a, const Matrix& b, const Mask& mask) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (mask(i, j)) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
    }
  }
  return worst;
}

Matrix bellman_operator(const Matrix& reward, const Matrix& transition, double gamma,
                        const Matrix& q) {
  const Eigen::Index Z = reward.rows(), A = reward.cols();
  const Vector v = q.rowwise().maxCoeff();
  const Vector pv = transition * v;
  Matrix out(Z, A);
  for (Eigen::Index z = 0; z < Z; ++z) {
    for (Eigen::Index a = 0; a < A; ++a) out(z, a) = reward(z, a) + gamma * pv(z * A + a);
  }
  return out;
}

QTable solve_agent_model(const Matrix& reward, const Matrix& transition, double gamma,
                         double tol) {
  QTable out;
  out.q = Matrix::Zero(reward.rows(), reward.cols());
  out.reachable = Mask::Constant(reward.rows(), reward.cols(), true);
  if (gamma == 0.0) {
    out.q = reward;
    out.iterations = 1;
    return out;
  }
  const double stop = tol * (1.0 - gamma) / (2.0 * gamma);
  for (long it = 1;; ++it) {
    Matrix next = bellman_operator(reward, transition, gamma, out.q);
    const double res = (next - out.q).cwiseAbs().maxCoeff();
    out.q.swap(next);
    out.iterations = it;
    if (res <= stop) {
      out.certified_error = gamma / (1.0 - gamma) * res;
      break;
    }
  }
  return out;
}

QTable solve_q_xi(const StationaryModel& sm, double gamma, double tol) {
  if (sm.r_xi.size() == 0) throw Error("stationary model lacks the induced model; call induced_model()");
  if (!sm.reachable.any()) throw Error("no reachable (z, a) pair");
  QTable out = solve_agent_model(sm.r_xi, sm.p_xi, gamma, tol);
  out.reachable = sm.reachable;
  return out;
}

Matrix solve_mdp(const Pomdp& p, double tol) {
  const double g = p.discount;
  Matrix q = Matrix::Zero(p.n_states, p.n_actions);
  for (;;) {
    const Vector v = q.rowwise().maxCoeff();
    Matrix next(p.n_states, p.n_actions);
    for (int a = 0; a < p.n_actions; ++a) next.col(a) = p.reward.col(a) + g * (p.transition[a] * v);
    const double res = (next - q).cwiseAbs().maxCoeff();
    q.swap(next);
    if (g == 0.0 || res * g / (1.0 - g) <= tol) break;
  }
  return q;
}

Vector solve_episodic_mdp(const Pomdp& p, double tol) {
  const double g = p.discount;
  Vector v = Vector::Zero(p.n_states);
  for (;;) {
    Vector next(p.n_states);
    for (int s = 0; s < p.n_states; ++s) {
      if (p.is_terminal(s)) {
        next(s) = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < p.n_actions; ++a) {
        best = std::max(best, p.reward(s, a) + g * p.transition[a].row(s).dot(v));
      }
      next(s) = best;
    }
    const double res = (next - v).cwiseAbs().maxCoeff();
    v.swap(next);
    if (g == 0.0 || res * g / (1.0 - g) <= tol) break;
  }
  return v;
}

Matrix evaluate_agent_policy(const Pomdp& p, const AgentStateMachine& m,
                             const std::vector<int>& actions) {
  const int S = p.n_states, Z = m.n_z;
  if (static_cast<int>(actions.size()) != Z) throw Error("policy table must cover every agent state");
  const long n = static_cast<long>(S) * Z;
  auto idx = [Z](int s, int z) { return static_cast<long>(s) * Z + z; };
  std::vector<Eigen::Triplet<double, long>> trip;
  Vector rhs(n);
  for (int s = 0; s < S; ++s) {
    for (int z = 0; z < Z; ++z) {
      const int a = actions[z];
      rhs(idx(s, z)) = p.reward(s, a);
      trip.emplace_back(idx(s, z), idx(s, z), 1.0);
      for (int s2 = 0; s2 < S; ++s2) {
        const double pt = p.transition[a](s, s2);
        if (pt == 0.0) continue;
        for (int y = 0; y < p.n_obs; ++y) {
          const double w = pt * p.observation[a](s2, y);
          if (w == 0.0) continue;
          trip.emplace_back(idx(s, z), idx(s2, m.next(z, y, a)), -p.discount * w);
        }
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::ColMajor, long> mat(n, n);
  mat.setFromTriplets(trip.begin(), trip.end());
  Vector w;
  if (n <= kDenseSolveLimit) {
    w = Matrix(mat).partialPivLu().solve(rhs);
  } else {
    Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor, long>> lu(mat);
    if (lu.info() != Eigen::Success) throw Error("policy evaluation system is singular");
    w = lu.solve(rhs);
  }
  Matrix out(S, Z);
  for (int s = 0; s < S; ++s) {
    for (int z = 0; z < Z; ++z) out(s, z) = w(idx(s, z));
  }
  return out;
}

Interval sandwich_interval(double v_fin, int t, int horizon, const Pomdp& p) {
  if (t > horizon) throw Error("sandwich_interval needs t <= T");
  const double scale = std::pow(p.discount, horizon - t) / (1.0 - p.discount);
  return {v_fin + scale * p.r_min(), v_fin + scale * p.r_max()};
}

double HistoryValueTable::slack(int t, const Pomdp& p) const {
  return std::pow(p.discount, horizon - t) * p.reward_span() / (1.0 - p.discount);
}

namespace {

/// Depth-first finite-horizon evaluator with exact-belief memoisation.
class HistoryEvaluator {
 public:
  HistoryEvaluator(const Pomdp& p, const AgentStateMachine& m, const HistoryDpOptions& opts)
      : p_(p), m_(m), opts_(opts) {}

  const std::vector<int>* policy = nullptr;
  long evaluations = 0;

  double q_star(const Belief& b, int a, int to_go) {
    if (to_go == 0) return 0.0;
    double q = expected_reward(p_, b, a);
    if (to_go == 1) return q;
    const Belief pred = predict(p_, b, a);
    double future = 0.0;
    for (int y = 0; y < p_.n_obs; ++y) {
      const Vector joint = pred.cwiseProduct(p_.observation[a].col(y));
      const double py = joint.sum();
      if (!(py > 0.0)) continue;
      future += py * v_star(belief_update(p_, b, a, y), to_go - 1);
    }
    return q + p_.discount * future;
  }

  double v_star(const Belief& b, int to_go) {
    if (to_go == 0) return 0.0;
    const std::string key = make_key(b, to_go, -1);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    count();
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < p_.n_actions; ++a) best = std::max(best, q_star(b, a, to_go));
    remember(key, best);
    return best;
  }

  double v_policy(const Belief& b, int z, int to_go) {
    if (to_go == 0) return 0.0;
    const std::string key = make_key(b, to_go, z);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    count();
    const int a = (*policy)[z];
    double v = expected_reward(p_, b, a);
    if (to_go > 1) {
      const Belief pred = predict(p_, b, a);
      double future = 0.0;
      for (int y = 0; y < p_.n_obs; ++y) {
        const double py = pred.cwiseProduct(p_.observation[a].col(y)).sum();
        if (!(py > 0.0)) continue;
        future += py * v_policy(belief_update(p_, b, a, y), m_.next(z, y, a), to_go - 1);
      }
      v += p_.discount * future;
    }
    remember(key, v);
    return v;
  }

 private:
  std::string make_key(const Belief& b, int to_go, int z) const {
    std::string key(sizeof(double) * b.size() + 2 * sizeof(int), '\0');
    std::memcpy(key.data(), b.data(), sizeof(double) * b.size());
    std::memcpy(key.data() + sizeof(double) * b.size(), &to_go, sizeof(int));
    std::memcpy(key.data() + sizeof(double) * b.size() + sizeof(int), &z, sizeof(int));
    return key;
  }
  void count() {
    if (++evaluations > opts_.work_cap) {
      throw SizeError("history DP exceeds the work cap of " + std::to_string(opts_.work_cap) +
                      " belief evaluations");
    }
  }
  void remember(const std::string& key, double v) {
    if (static_cast<long>(memo_.size()) < opts_.memo_cap) memo_.emplace(key, v);
  }

  const Pomdp& p_;
  const AgentStateMachine& m_;
  HistoryDpOptions opts_;
  std::unordered_map<std::string, double> memo_;
};

}  // namespace

HistoryValueTable solve_history_dp(const Pomdp& p, const AgentStateMachine& m, int horizon,
                                   const std::optional<std::vector<int>>& policy,
                                   const HistoryDpOptions& opts) {
  if (horizon < 1) throw Error("history DP needs horizon >= 1");
  if (policy && static_cast<int>(policy->size()) != m.n_z) {
    throw Error("policy table must cover every agent state");
  }
  const int store = opts.store_depth < 0 ? horizon : std::min(opts.store_depth, horizon);
  HistoryValueTable out;
  out.horizon = horizon;
  out.tree = enumerate_histories(p, m, uniform_policy(m.n_z, p.n_actions), store);

  HistoryEvaluator eval(p, m, opts);
  if (policy) eval.policy = &*policy;
  const auto n = static_cast<Eigen::Index>(out.tree.nodes.size());
  out.q_star.resize(n, p.n_actions);
  out.v_star.resize(n);
  if (policy) out.v_policy.resize(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const HistoryNode& node = out.tree.nodes[v];
    const int to_go = horizon - node.depth;
    for (int a = 0; a < p.n_actions; ++a) out.q_star(v, a) = eval.q_star(node.belief, a, to_go);
    out.v_star(v) = to_go == 0 ? 0.0 : out.q_star.row(v).maxCoeff();
    if (policy) out.v_policy(v) = eval.v_policy(node.belief, node.agent_state, to_go);
  }
  out.evaluations = eval.evaluations;
  return out;
}

}  // namespace rqlab
