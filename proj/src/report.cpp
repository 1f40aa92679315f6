#include "rqlab/report.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace rqlab {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json mask_json(const Mask& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<bool> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json to_json(const StationaryModel& sm) {
  nlohmann::json j;
  j["joint_states"] = sm.space.size();
  j["convergence_residual"] = sm.convergence_residual;
  j["iterations"] = sm.iterations;
  j["solved_directly"] = sm.solved_directly;
  j["unique"] = sm.unique;
  j["positivity_ok"] = sm.positivity_ok;
  j["min_mass"] = sm.min_mass;
  j["support_size"] = sm.support_size;
  j["a2_verdict"] = sm.unique && sm.positivity_ok
                        ? "A2 holds numerically"
                        : "A2 violated: analysis restricted to the recurrent support";
  j["notes"] = sm.notes;
  j["xi_za"] = matrix_json(sm.xi_za);
  j["reachable"] = mask_json(sm.reachable);
  j["r_xi"] = matrix_json(sm.r_xi);
  j["p_xi"] = matrix_json(sm.p_xi);
  j["observation_predictor"] = matrix_json(sm.obs_predictor);
  return j;
}

nlohmann::json to_json(const QTable& q) {
  nlohmann::json j;
  j["q"] = matrix_json(q.q);
  j["reachable"] = mask_json(q.reachable);
  j["greedy_policy"] = q.greedy_policy();
  j["greedy_value"] = vector_json(q.greedy_value());
  j["certified_error"] = q.certified_error;
  j["iterations"] = q.iterations;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string rql_metrics_header() { return "seed,step,sup_gap,visited_fraction\n"; }

std::string rql_metrics_rows(std::uint64_t seed, const RqlRun& run) {
  std::string out;
  for (const RqlCheckpoint& c : run.log) {
    out += std::to_string(seed) + ',' + std::to_string(c.step) + ',' + format_double(c.gap) + ',' +
           format_double(c.visited_fraction) + '\n';
  }
  return out;
}

std::string ais_metrics_header() {
  return "seed,step,return_mean,return_std,reward_loss,observation_loss,epsilon,buffer_size,delta_tilde\n";
}

std::string ais_metrics_rows(std::uint64_t seed, const RqlAisRun& run) {
  std::string out;
  for (const AisLogRow& r : run.log) {
    out += std::to_string(seed) + ',' + std::to_string(r.step) + ',' + format_double(r.return_mean) + ',' +
           format_double(r.return_std) + ',' + format_double(r.reward_loss) + ',' +
           format_double(r.observation_loss) + ',' + format_double(r.epsilon) + ',' +
           std::to_string(r.buffer_size) + ',' + format_double(r.delta_tilde) + '\n';
  }
  return out;
}

}  // namespace rqlab
