// rqlab: command-line driver.
// Exit codes: 0 all checks pass, 1 failures (or runtime errors), 2 usage/config errors.
#include "rqlab/bounds.hpp"
#include "rqlab/config.hpp"
#include "rqlab/ipm.hpp"
#include "rqlab/report.hpp"
#include "rqlab/rql.hpp"
#include "rqlab/rql_ais.hpp"
#include "rqlab/suite.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace rqlab;
using nlohmann::json;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string instance;
  std::string repr;
  std::optional<double> gamma;
  std::string ipm;
  int history_horizon = -1;
  // ipm subcommand
  std::string mu, nu, f;
  std::string metric = "discrete";
};

ExperimentConfig build_config(const Flags& fl, const std::string& mode) {
  ExperimentConfig cfg = fl.config.empty() ? ExperimentConfig{} : load_config(fl.config);
  cfg.mode = mode;
  if (fl.seed) {
    cfg.seeds = {*fl.seed};
    cfg.suite.seed = *fl.seed;
  }
  if (!fl.out.empty()) cfg.out = fl.out;
  if (!fl.instance.empty()) cfg.instance = fl.instance;
  if (!fl.repr.empty()) cfg.representation = fl.repr;
  if (fl.gamma) {
    cfg.gamma = fl.gamma;
    cfg.ais.gamma = *fl.gamma;
    cfg.suite.random.discount = *fl.gamma;
  }
  if (!fl.ipm.empty()) {
    cfg.ipm = fl.ipm;
    cfg.suite.ipms = {fl.ipm};
  }
  if (fl.history_horizon >= 0) cfg.history_horizon = fl.history_horizon;
  validate_config(cfg);
  return cfg;
}

std::string action_name(const Pomdp& p, int a) {
  return a < static_cast<int>(p.action_labels.size()) ? p.action_labels[a] : "a" + std::to_string(a);
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out) / name).string();
}

IpmSpec make_ipm(const std::string& name, const AgentStateMachine& m) {
  switch (parse_ipm_kind(name)) {
    case IpmKind::TotalVariation: return IpmSpec::total_variation(m.n_z);
    case IpmKind::Wasserstein: return IpmSpec::wasserstein(m.metric_or_discrete());
    case IpmKind::Mmd: return IpmSpec::mmd(m.n_z);
  }
  throw ConfigError("unknown ipm " + name);
}

// Inline JSON ("[0.5, 0.5]") or a path to a JSON file.
json read_json_arg(const std::string& arg, const std::string& what) {
  if (arg.empty()) throw ConfigError("missing --" + what);
  try {
    if (std::filesystem::exists(arg)) {
      std::ifstream in(arg);
      return json::parse(in);
    }
    return json::parse(arg);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse --" + what + ": " + e.what());
  }
}

Vector read_vector(const std::string& arg, const std::string& what) {
  const json j = read_json_arg(arg, what);
  if (!j.is_array()) throw ConfigError("--" + what + " must be a JSON array");
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

int cmd_validate(const ExperimentConfig& cfg) {
  Pomdp p;
  const auto names = canonical_names();
  if (std::find(names.begin(), names.end(), cfg.instance) != names.end()) {
    p = canonical_instance(cfg.instance);
  } else if (cfg.instance == "random") {
    p = generate_instance(cfg.random);
  } else {
    try {
      p = load_pomdp(cfg.instance);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      std::cout << "invalid: " << e.what() << "\n";
      return kFail;
    }
  }
  if (cfg.gamma) p.discount = *cfg.gamma;
  const ValidationReport report = validate(p);
  for (const Violation& v : report.violations) {
    std::cout << "violation: " << v.tensor << " row=" << v.row << " action=" << v.action
              << " sum=" << format_double(v.sum);
    if (!v.detail.empty()) std::cout << " (" << v.detail << ")";
    std::cout << "\n";
  }
  bool ok = report.ok();
  if (ok) {
    try {
      const AgentStateMachine m = resolve_representation(cfg.representation, p);
      require_valid(m);
      std::cout << "representation: |Z| = " << m.n_z << "\n";
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      std::cout << "violation: representation: " << e.what() << "\n";
      ok = false;
    }
  }
  std::cout << (ok ? "valid" : "invalid") << "\n";
  return ok ? kPass : kFail;
}

int cmd_analyze(const ExperimentConfig& cfg) {
  const Pomdp p = resolve_instance(cfg);
  const AgentStateMachine m = resolve_representation(cfg.representation, p);
  const StationaryModel sm = analyze(p, m, resolve_exploration(cfg.exploration, m, p));
  json j = to_json(sm);
  j["instance"] = cfg.instance;
  j["representation"] = cfg.representation;
  j["exploration"] = cfg.exploration;
  write_json(out_path(cfg, "analyze.json"), j);
  std::cout << "joint states " << sm.space.size() << ", support " << sm.support_size << ", residual "
            << format_double(sm.convergence_residual) << "\n"
            << j["a2_verdict"].get<std::string>() << "\n";
  return kPass;
}

int cmd_solve(const ExperimentConfig& cfg) {
  const Pomdp p = resolve_instance(cfg);
  const AgentStateMachine m = resolve_representation(cfg.representation, p);
  const StationaryModel sm = analyze(p, m, resolve_exploration(cfg.exploration, m, p));
  const QTable q = solve_q_xi(sm, p.discount, cfg.solver_tol);
  json j = to_json(q);
  j["instance"] = cfg.instance;
  j["representation"] = cfg.representation;
  j["gamma"] = p.discount;
  std::vector<std::string> labels;
  for (int z = 0; z < m.n_z; ++z) labels.push_back(m.label(z));
  j["agent_states"] = labels;
  if (cfg.history_horizon > 0) {
    const HistoryValueTable table = solve_history_dp(p, m, cfg.history_horizon);
    std::ostringstream csv;
    csv << "depth,history,action,value\n";
    for (std::size_t v = 0; v < table.tree.nodes.size(); ++v) {
      const int node = static_cast<int>(v);
      const std::string h = table.tree.history(node).to_string();
      for (int a = 0; a < p.n_actions; ++a) {
        csv << table.tree.nodes[v].depth << ",\"" << h << "\"," << a << ','
            << format_double(table.q_star(node, a)) << '\n';
      }
    }
    write_text(out_path(cfg, "history_values.csv"), csv.str());
    j["history_horizon"] = cfg.history_horizon;
  }
  write_json(out_path(cfg, "solve.json"), j);
  std::cout << "value iteration: " << q.iterations << " sweeps, certified error "
            << format_double(q.certified_error) << "\n";
  for (int z = 0; z < m.n_z; ++z) {
    if (!q.reachable.row(z).any()) continue;
    std::cout << "  " << std::setw(24) << std::left << m.label(z) << " -> "
              << action_name(p, q.greedy_action(z)) << "\n";
  }
  return kPass;
}

int cmd_train_rql(const ExperimentConfig& cfg) {
  const Pomdp p = resolve_instance(cfg);
  const AgentStateMachine m = resolve_representation(cfg.representation, p);
  const AgentPolicy explore = resolve_exploration(cfg.exploration, m, p);
  const StationaryModel sm = analyze(p, m, explore);
  const QTable q_xi = solve_q_xi(sm, p.discount);
  std::string csv = rql_metrics_header();
  json runs = json::array();
  for (std::uint64_t seed : cfg.seeds) {
    RqlOptions opts = cfg.rql;
    opts.seed = seed;
    const RqlRun run = rql_train(p, m, explore, opts, &q_xi);
    csv += rql_metrics_rows(seed, run);
    const double gap = run.log.empty() ? reachable_sup_norm(run.q.q, q_xi.q, q_xi.reachable)
                                       : run.log.back().gap;
    json r;
    r["seed"] = seed;
    r["steps"] = run.steps;
    r["q"] = to_json(run.q);
    r["visits"] = matrix_json(run.visits.cast<double>().matrix());
    r["final_gap"] = gap;
    r["visit_tv"] = visit_tv(run, sm);
    runs.push_back(r);
    std::cout << "seed " << seed << ": sup gap " << format_double(gap) << "\n";
  }
  write_text(out_path(cfg, "rql_metrics.csv"), csv);
  json j;
  j["instance"] = cfg.instance;
  j["representation"] = cfg.representation;
  j["rate"] = to_string(cfg.rql.rate);
  j["q_xi"] = to_json(q_xi);
  j["runs"] = runs;
  write_json(out_path(cfg, "rql_q.json"), j);
  return kPass;
}

int cmd_train_ais(const ExperimentConfig& cfg) {
  const Pomdp p = resolve_instance(cfg);
  const AgentStateMachine m = resolve_representation(cfg.representation, p);
  std::string csv = ais_metrics_header();
  json runs = json::array();
  for (std::uint64_t seed : cfg.seeds) {
    RqlAisConfig ac = cfg.ais;
    ac.seed = seed;
    const RqlAisRun run = train_rql_ais(p, m, ac);
    csv += ais_metrics_rows(seed, run);
    json r = to_json(run);
    r["seed"] = seed;
    runs.push_back(r);
    std::cout << "seed " << seed << ": final return " << format_double(run.final_return) << " after "
              << run.updates << " updates\n";
  }
  write_text(out_path(cfg, "ais_metrics.csv"), csv);
  json j;
  j["instance"] = cfg.instance;
  j["representation"] = cfg.representation;
  j["runs"] = runs;
  write_json(out_path(cfg, "ais_final.json"), j);
  return kPass;
}

void print_certificate(const BoundCertificate& c) {
  std::cout << "ipm " << to_string(c.kind) << ", rho(V*_xi) = " << format_double(c.rho_value) << "\n";
  std::cout << std::setw(3) << "t" << std::setw(14) << "eps_bar" << std::setw(14) << "delta_bar"
            << std::setw(14) << "rhs" << std::setw(14) << "worst_lhs" << "\n";
  std::ostringstream row;
  row << std::fixed << std::setprecision(6);
  for (int t = 1; t <= c.t_cert; ++t) {
    row << std::setw(3) << t << std::setw(14) << c.epsilon_agg.bar[t - 1] << std::setw(14)
        << c.delta_agg.bar[t - 1] << std::setw(14) << c.rhs[t - 1] << std::setw(14) << c.worst_lhs[t - 1]
        << "\n";
  }
  std::cout << row.str();
  for (const auto& [kind, tally] : c.tally) {
    std::cout << "  " << kind << ": " << tally.certified << " certified, " << tally.violated
              << " violated, " << tally.inconclusive << " inconclusive\n";
  }
  std::cout << (c.all_certified() ? "certified" : "NOT certified") << "\n";
}

int cmd_bounds(const ExperimentConfig& cfg) {
  const Pomdp p = resolve_instance(cfg);
  const AgentStateMachine m = resolve_representation(cfg.representation, p);
  if (cfg.exploration != "uniform") {
    // Certification enumerates histories under the uniform policy.
    throw ConfigError("bounds requires the uniform exploration policy");
  }
  const StationaryModel sm = analyze(p, m, uniform_policy(m.n_z, p.n_actions));
  const QTable q = solve_q_xi(sm, p.discount, cfg.solver_tol);
  const IpmSpec spec = make_ipm(cfg.ipm, m);
  if (spec.kind == IpmKind::Mmd) {
    std::cerr << "rqlab: the MMD functional rho has no closed form; bounds support tv and wasserstein\n";
    return kUsage;
  }
  const BoundCertificate cert = certify(p, m, sm, q, spec, cfg.certify);
  json j = to_json(cert);
  j["instance"] = cfg.instance;
  j["representation"] = cfg.representation;
  write_json(out_path(cfg, "bounds.json"), j);
  write_text(out_path(cfg, "bounds.csv"), certificate_csv(cert));
  print_certificate(cert);
  return cert.all_certified() ? kPass : kFail;
}

int cmd_ipm(const Flags& fl) {
  const IpmKind kind = parse_ipm_kind(fl.ipm.empty() ? "tv" : fl.ipm);
  const Vector mu = read_vector(fl.mu, "mu");
  const Vector nu = read_vector(fl.nu, "nu");
  if (mu.size() != nu.size()) throw ConfigError("--mu and --nu must have the same length");
  const int n = static_cast<int>(mu.size());
  Matrix metric;
  if (fl.metric == "discrete") {
    metric = discrete_metric(n);
  } else if (fl.metric == "line") {
    metric = line_metric(n);
  } else {
    const auto rows = read_json_arg(fl.metric, "metric").get<std::vector<std::vector<double>>>();
    metric.resize(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<int>(rows[i].size()) != n) throw ConfigError("--metric rows must match the vectors");
      for (int k = 0; k < n; ++k) metric(static_cast<Eigen::Index>(i), k) = rows[i][k];
    }
    if (metric.rows() != n) throw ConfigError("--metric must be square");
  }
  IpmSpec spec;
  switch (kind) {
    case IpmKind::TotalVariation: spec = IpmSpec::total_variation(n); break;
    case IpmKind::Wasserstein: spec = IpmSpec::wasserstein(metric); break;
    case IpmKind::Mmd: spec = IpmSpec::mmd(n); break;
  }
  json j;
  j["ipm"] = to_string(kind);
  j["distance"] = ipm_distance(spec, mu, nu);
  if (!fl.f.empty()) j["rho"] = rho(spec, read_vector(fl.f, "f"));
  std::cout << j.dump() << "\n";
  return kPass;
}

int cmd_suite(const ExperimentConfig& cfg) {
  const SuiteReport report = run_suite(cfg.suite);
  write_json(out_path(cfg, "suite.json"), report.json);
  std::cout << report.certificates << " certificates, " << report.failures << " failures\n";
  return report.pass() ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rqlab: agent-state analysis, bounds and recurrent Q-learning on tabular POMDPs"};
  app.require_subcommand(1);
  Flags fl;

  auto add_common = [&fl](CLI::App* sub) {
    sub->add_option("--config", fl.config, "INI-style experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", fl.seed, "seed (overrides [run] seeds)");
    sub->add_option("--out", fl.out, "output directory");
    sub->add_option("--instance", fl.instance, "canonical name, instance JSON, or 'random'");
    sub->add_option("--repr", fl.repr, "frame_stack:<n> or machine JSON");
    sub->add_option("--gamma", fl.gamma, "discount override")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--ipm", fl.ipm, "tv, wasserstein or mmd")
        ->check(CLI::IsMember({"tv", "wasserstein", "was", "mmd"}));
  };

  struct Entry {
    std::string name;
    std::string help;
    std::function<int(const ExperimentConfig&)> run;
  };
  const std::vector<Entry> entries{
      {"validate", "check an instance and representation", cmd_validate},
      {"analyze", "stationary distribution and induced agent-state model", cmd_analyze},
      {"solve", "Q*_xi by value iteration (and optional history values)", cmd_solve},
      {"train-rql", "tabular recurrent Q-learning under a fixed exploration policy", cmd_train_rql},
      {"train-rql-ais", "episodic RQL-AIS with replay and n-step targets", cmd_train_ais},
      {"bounds", "certify the agent-state approximation bound", cmd_bounds},
      {"suite", "randomized certification suite", cmd_suite},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    if (e.name == "solve") {
      sub->add_option("--history-horizon", fl.history_horizon, "dump history values up to this depth");
    }
    subs.emplace_back(sub, &e);
  }
  CLI::App* ipm = app.add_subcommand("ipm", "distance between two distributions");
  ipm->add_option("--ipm", fl.ipm, "tv, wasserstein or mmd")
      ->check(CLI::IsMember({"tv", "wasserstein", "was", "mmd"}));
  ipm->add_option("--mu", fl.mu, "JSON array or file")->required();
  ipm->add_option("--nu", fl.nu, "JSON array or file")->required();
  ipm->add_option("--f", fl.f, "also report rho(f) for this JSON array");
  ipm->add_option("--metric", fl.metric, "discrete, line, or JSON matrix (Wasserstein)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (ipm->parsed()) return cmd_ipm(fl);
    for (const auto& [sub, entry] : subs) {
      if (sub->parsed()) return entry->run(build_config(fl, entry->name));
    }
  } catch (const ConfigError& e) {
    std::cerr << "rqlab: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "rqlab: error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
