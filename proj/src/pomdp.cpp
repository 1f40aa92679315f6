#include "rqlab/pomdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace rqlab {

Pomdp Pomdp::zeros(int n_states, int n_obs, int n_actions, double discount) {
  Pomdp p;
  p.n_states = n_states;
  p.n_obs = n_obs;
  p.n_actions = n_actions;
  p.transition.assign(n_actions, Matrix::Zero(n_states, n_states));
  p.observation.assign(n_actions, Matrix::Zero(n_states, n_obs));
  p.reward = Matrix::Zero(n_states, n_actions);
  p.discount = discount;
  p.initial_state_dist = Vector::Zero(n_states);
  return p;
}

namespace {

void check_row(const Eigen::Ref<const Vector>& row, const std::string& tensor, int index,
               int action, double tol, std::vector<Violation>& out) {
  const double sum = row.sum();
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    if (row(k) < 0.0 || !std::isfinite(row(k))) {
      out.push_back({tensor, index, action, sum,
                     "entry " + std::to_string(k) + " = " + std::to_string(row(k))});
    }
  }
  if (!(std::abs(sum - 1.0) <= tol)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "row sums to " << sum;
    out.push_back({tensor, index, action, sum, msg.str()});
  }
}

}  // namespace

ValidationReport validate(const Pomdp& p, double tol) {
  ValidationReport report;
  auto& v = report.violations;
  const int S = p.n_states, Y = p.n_obs, A = p.n_actions;
  if (S <= 0 || Y <= 0 || A <= 0) {
    v.push_back({"shape", -1, -1, 0.0, "all of n_states, n_obs, n_actions must be positive"});
    return report;
  }
  bool shapes_ok = static_cast<int>(p.transition.size()) == A &&
                   static_cast<int>(p.observation.size()) == A && p.reward.rows() == S &&
                   p.reward.cols() == A && p.initial_state_dist.size() == S;
  for (int a = 0; shapes_ok && a < A; ++a) {
    shapes_ok = p.transition[a].rows() == S && p.transition[a].cols() == S &&
                p.observation[a].rows() == S && p.observation[a].cols() == Y;
  }
  if (!shapes_ok) {
    v.push_back({"shape", -1, -1, 0.0, "tensor dimensions disagree with n_states/n_obs/n_actions"});
    return report;
  }
  if (!p.terminal.empty() && static_cast<int>(p.terminal.size()) != S) {
    v.push_back({"shape", -1, -1, 0.0, "terminal mask length differs from n_states"});
  }
  if (!(p.discount >= 0.0 && p.discount < 1.0)) {
    v.push_back({"discount", -1, -1, p.discount, "discount must lie in [0, 1)"});
  }
  if (!p.reward.allFinite()) {
    v.push_back({"reward", -1, -1, 0.0, "reward table has non-finite entries"});
  }
  for (int a = 0; a < A; ++a) {
    for (int s = 0; s < S; ++s) {
      check_row(p.transition[a].row(s).transpose(), "transition", s, a, tol, v);
      check_row(p.observation[a].row(s).transpose(), "observation", s, a, tol, v);
    }
  }
  check_row(p.initial_state_dist, "initial_state_dist", -1, -1, tol, v);
  return report;
}

void require_valid(const Pomdp& p) {
  const ValidationReport report = validate(p);
  if (report.ok()) return;
  std::ostringstream msg;
  msg << "invalid POMDP (" << report.violations.size() << " violations)";
  for (std::size_t i = 0; i < report.violations.size() && i < 5; ++i) {
    const Violation& x = report.violations[i];
    msg << "; " << x.tensor << "[row " << x.row << ", action " << x.action << "]: " << x.detail;
  }
  throw Error(msg.str());
}

namespace {

void check_index(int value, int bound, const char* what) {
  if (value < 0 || value >= bound) {
    throw std::out_of_range(std::string(what) + " index " + std::to_string(value) +
                            " out of range [0, " + std::to_string(bound) + ")");
  }
}

}  // namespace

StepResult step(const Pomdp& p, int s, int a, Rng& rng) {
  check_index(s, p.n_states, "state");
  check_index(a, p.n_actions, "action");
  StepResult out;
  out.reward = p.reward(s, a);
  out.next_state = sample_categorical(p.transition[a].row(s), rng);
  out.observation = sample_categorical(p.observation[a].row(out.next_state), rng);
  return out;
}

InitialDraw reset(const Pomdp& p, Rng& rng) {
  InitialDraw d;
  d.state = sample_categorical(p.initial_state_dist, rng);
  d.observation = sample_categorical(p.observation[kNullAction].row(d.state), rng);
  return d;
}

Belief initial_belief(const Pomdp& p, int y1) {
  check_index(y1, p.n_obs, "observation");
  Belief b = p.initial_state_dist.cwiseProduct(p.observation[kNullAction].col(y1));
  const double z = b.sum();
  if (!(z > 0.0)) {
    throw UnreachableHistory("initial observation " + std::to_string(y1) +
                             " has zero probability");
  }
  return b / z;
}

Belief predict(const Pomdp& p, const Belief& b, int a) {
  return p.transition[a].transpose() * b;
}

Vector observation_distribution(const Pomdp& p, const Belief& b, int a) {
  return p.observation[a].transpose() * predict(p, b, a);
}

Belief belief_update(const Pomdp& p, const Belief& b, int a, int y) {
  check_index(a, p.n_actions, "action");
  check_index(y, p.n_obs, "observation");
  Belief next = predict(p, b, a).cwiseProduct(p.observation[a].col(y));
  const double z = next.sum();
  if (!(z > 0.0)) {
    throw UnreachableHistory("observation " + std::to_string(y) + " after action " +
                             std::to_string(a) + " has zero probability");
  }
  next /= z;
  // Clamp rounding noise so the result stays a probability vector.
  next = next.cwiseMax(0.0);
  return next / next.sum();
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> as_vector(const json& j, std::size_t expected, const std::string& what) {
  if (!j.is_array() || j.size() != expected) {
    throw Error("'" + what + "' must be an array of length " + std::to_string(expected));
  }
  return j.get<std::vector<double>>();
}

}  // namespace

json to_json(const Pomdp& p) {
  json j;
  j["n_states"] = p.n_states;
  j["n_obs"] = p.n_obs;
  j["n_actions"] = p.n_actions;
  j["discount"] = p.discount;
  // transition[s][a][s'], observation[s'][a][y], reward[s][a]
  json trans = json::array();
  json obs = json::array();
  for (int s = 0; s < p.n_states; ++s) {
    json ta = json::array();
    json oa = json::array();
    for (int a = 0; a < p.n_actions; ++a) {
      json trow = json::array();
      for (int k = 0; k < p.n_states; ++k) trow.push_back(p.transition[a](s, k));
      ta.push_back(std::move(trow));
      json orow = json::array();
      for (int y = 0; y < p.n_obs; ++y) orow.push_back(p.observation[a](s, y));
      oa.push_back(std::move(orow));
    }
    trans.push_back(std::move(ta));
    obs.push_back(std::move(oa));
  }
  j["transition"] = std::move(trans);
  j["observation"] = std::move(obs);
  j["reward"] = matrix_rows(p.reward);
  j["initial_state_dist"] = std::vector<double>(p.initial_state_dist.data(),
                                                p.initial_state_dist.data() + p.n_states);
  if (!p.terminal.empty()) {
    json t = json::array();
    for (int s = 0; s < p.n_states; ++s) {
      if (p.terminal[s]) t.push_back(s);
    }
    j["terminal"] = std::move(t);
  }
  if (!p.state_labels.empty() || !p.obs_labels.empty() || !p.action_labels.empty()) {
    j["labels"] = {{"states", p.state_labels},
                   {"observations", p.obs_labels},
                   {"actions", p.action_labels}};
  }
  return j;
}

Pomdp pomdp_from_json(const json& j) {
  for (const char* key : {"n_states", "n_obs", "n_actions", "discount", "transition",
                          "observation", "reward", "initial_state_dist"}) {
    if (!j.contains(key)) throw Error(std::string("POMDP file lacks key '") + key + "'");
  }
  const int S = j.at("n_states").get<int>();
  const int Y = j.at("n_obs").get<int>();
  const int A = j.at("n_actions").get<int>();
  if (S <= 0 || Y <= 0 || A <= 0) throw Error("POMDP dimensions must be positive");
  Pomdp p = Pomdp::zeros(S, Y, A, j.at("discount").get<double>());

  const json& trans = j.at("transition");
  const json& obs = j.at("observation");
  const json& rew = j.at("reward");
  if (!trans.is_array() || trans.size() != static_cast<std::size_t>(S) || !obs.is_array() ||
      obs.size() != static_cast<std::size_t>(S) || !rew.is_array() ||
      rew.size() != static_cast<std::size_t>(S)) {
    throw Error("transition/observation/reward must have n_states outer entries");
  }
  for (int s = 0; s < S; ++s) {
    if (trans[s].size() != static_cast<std::size_t>(A) || obs[s].size() != static_cast<std::size_t>(A)) {
      throw Error("transition/observation rows must have n_actions entries");
    }
    const auto r = as_vector(rew[s], A, "reward row");
    for (int a = 0; a < A; ++a) {
      p.reward(s, a) = r[a];
      const auto trow = as_vector(trans[s][a], S, "transition row");
      const auto orow = as_vector(obs[s][a], Y, "observation row");
      for (int k = 0; k < S; ++k) p.transition[a](s, k) = trow[k];
      for (int y = 0; y < Y; ++y) p.observation[a](s, y) = orow[y];
    }
  }
  const auto init = as_vector(j.at("initial_state_dist"), S, "initial_state_dist");
  for (int s = 0; s < S; ++s) p.initial_state_dist(s) = init[s];

  if (j.contains("terminal")) {
    p.terminal.assign(S, false);
    for (const auto& s : j.at("terminal")) {
      const int idx = s.get<int>();
      if (idx < 0 || idx >= S) throw Error("terminal state index out of range");
      p.terminal[idx] = true;
    }
  }
  if (j.contains("labels")) {
    const json& l = j.at("labels");
    if (l.contains("states")) p.state_labels = l.at("states").get<std::vector<std::string>>();
    if (l.contains("observations")) p.obs_labels = l.at("observations").get<std::vector<std::string>>();
    if (l.contains("actions")) p.action_labels = l.at("actions").get<std::vector<std::string>>();
  }
  return p;
}

Pomdp load_pomdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open POMDP file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("malformed POMDP file '" + path + "': " + e.what());
  }
  return pomdp_from_json(j);
}

void save_pomdp(const Pomdp& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_json(p).dump(2) << '\n';
}

}  // namespace rqlab
