#include "rqlab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <fstream>
#include <sstream>

namespace rqlab {

namespace pt = boost::property_tree;

namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& raw) {
  std::istringstream is(raw);
  T v{};
  is >> v;
  if (!is || !(is >> std::ws).eof()) throw ConfigError("bad value for " + key + ": '" + raw + "'");
  return v;
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + raw + "'");
}

template <>
std::string parse_value<std::string>(const std::string&, const std::string& raw) {
  return raw;
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(raw);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  for (const std::string& item : split_list(raw)) out.push_back(parse_value<T>(key, item));
  return out;
}

// Binds "section.key" names to config fields.
class Binder {
 public:
  template <typename T>
  void bind(const std::string& name, T& field) {
    setters_[name] = [&field, name](const std::string& raw) { field = parse_value<T>(name, raw); };
  }
  template <typename T>
  void bind_list(const std::string& name, std::vector<T>& field) {
    setters_[name] = [&field, name](const std::string& raw) { field = parse_list<T>(name, raw); };
  }
  void bind_custom(const std::string& name, std::function<void(const std::string&)> fn) {
    setters_[name] = std::move(fn);
  }
  void apply(const std::string& name, const std::string& raw) {
    auto it = setters_.find(name);
    if (it == setters_.end()) throw ConfigError("unknown config key '" + name + "'");
    try {
      it->second(raw);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(name + ": " + e.what());
    }
  }

 private:
  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

void bind_random(Binder& b, const std::string& section, RandomInstanceSpec& r) {
  b.bind(section + ".min_states", r.min_states);
  b.bind(section + ".max_states", r.max_states);
  b.bind(section + ".min_obs", r.min_obs);
  b.bind(section + ".max_obs", r.max_obs);
  b.bind(section + ".min_actions", r.min_actions);
  b.bind(section + ".max_actions", r.max_actions);
  b.bind(section + ".concentration", r.concentration);
  b.bind(section + ".sparsity", r.sparsity);
  b.bind(section + ".reward_lo", r.reward_lo);
  b.bind(section + ".reward_hi", r.reward_hi);
  b.bind(section + ".discount", r.discount);
  b.bind(section + ".seed", r.seed);
}

void bind_certify(Binder& b, const std::string& section, CertifyOptions& c) {
  b.bind(section + ".t_cert", c.t_cert);
  b.bind(section + ".t_dp", c.t_dp);
  b.bind(section + ".profile_budget", c.profile_budget);
  b.bind(section + ".sandwich_budget", c.sandwich_budget);
  b.bind(section + ".refine_fraction", c.refine_fraction);
  b.bind(section + ".inconclusive_fraction", c.inconclusive_fraction);
  b.bind(section + ".max_trials", c.belief.max_trials);
}

Binder make_binder(ExperimentConfig& cfg) {
  Binder b;
  b.bind("run.mode", cfg.mode);
  b.bind_list("run.seeds", cfg.seeds);
  b.bind_custom("run.seed", [&cfg](const std::string& raw) {
    cfg.seeds = {parse_value<std::uint64_t>("run.seed", raw)};
  });
  b.bind("run.out", cfg.out);

  b.bind("instance.source", cfg.instance);
  b.bind_custom("instance.gamma", [&cfg](const std::string& raw) {
    cfg.gamma = parse_value<double>("instance.gamma", raw);
  });
  bind_random(b, "random", cfg.random);

  b.bind("representation.spec", cfg.representation);
  b.bind("exploration.policy", cfg.exploration);

  b.bind("solve.tol", cfg.solver_tol);
  b.bind("solve.history_horizon", cfg.history_horizon);

  b.bind("bounds.ipm", cfg.ipm);
  bind_certify(b, "bounds", cfg.certify);

  b.bind("rql.steps", cfg.rql.steps);
  b.bind_custom("rql.rate", [&cfg](const std::string& raw) { cfg.rql.rate = parse_rate_mode(raw); });
  b.bind("rql.power", cfg.rql.power);
  b.bind("rql.eval_every", cfg.rql.eval_every);
  b.bind_list("rql.checkpoints", cfg.rql.checkpoints);
  b.bind("rql.track_transitions", cfg.rql.track_transitions);

  RqlAisConfig& a = cfg.ais;
  b.bind("ais.total_steps", a.total_steps);
  b.bind("ais.max_episode_length", a.max_episode_length);
  b.bind("ais.sequence_length", a.sequence_length);
  b.bind("ais.burn_in", a.burn_in);
  b.bind("ais.nstep", a.nstep);
  b.bind("ais.batch_size", a.batch_size);
  b.bind("ais.update_every", a.update_every);
  b.bind("ais.target_sync", a.target_sync);
  b.bind("ais.learning_starts", a.learning_starts);
  b.bind("ais.buffer_capacity", a.buffer_capacity);
  b.bind("ais.gamma", a.gamma);
  b.bind("ais.lambda", a.lambda);
  b.bind("ais.q_lr", a.q_lr);
  b.bind("ais.ais_lr", a.ais_lr);
  b.bind_custom("ais.optimizer", [&a](const std::string& raw) { a.ais_optimizer = parse_ais_optimizer(raw); });
  b.bind("ais.prioritized", a.prioritized);
  b.bind("ais.per_alpha", a.per_alpha);
  b.bind("ais.per_beta_start", a.per_beta_start);
  b.bind("ais.per_beta_end", a.per_beta_end);
  b.bind("ais.epsilon_start", a.epsilon.start);
  b.bind("ais.epsilon_end", a.epsilon.end);
  b.bind("ais.epsilon_decay", a.epsilon.decay);
  b.bind("ais.eval_every", a.eval_every);
  b.bind("ais.eval_episodes", a.eval_episodes);

  b.bind("suite.instances", cfg.suite.instances);
  b.bind("suite.seed", cfg.suite.seed);
  b.bind_list("suite.frame_stacks", cfg.suite.frame_stacks);
  b.bind_list("suite.ipms", cfg.suite.ipms);
  bind_random(b, "suite_random", cfg.suite.random);
  bind_certify(b, "suite", cfg.suite.certify);
  return b;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  Binder binder = make_binder(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body) binder.apply(section + "." + key, value.data());
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  if (cfg.gamma) require(*cfg.gamma >= 0.0 && *cfg.gamma < 1.0, "gamma must lie in [0, 1)");
  require(cfg.ais.gamma >= 0.0 && cfg.ais.gamma < 1.0, "ais.gamma must lie in [0, 1)");
  require(cfg.ais.lambda >= 0.0 && cfg.ais.lambda <= 1.0, "ais.lambda must lie in [0, 1]");
  require(cfg.ais.per_alpha >= 0.0, "ais.per_alpha must be >= 0");
  require(cfg.ais.epsilon.decay > 0.0, "ais.epsilon_decay must be positive");
  require(cfg.rql.steps > 0, "rql.steps must be positive");
  require(cfg.certify.t_cert >= 1 && cfg.certify.t_dp >= cfg.certify.t_cert, "need 1 <= t_cert <= t_dp");
  require(cfg.suite.instances >= 0, "suite.instances must be >= 0");
  require(!cfg.seeds.empty(), "at least one seed is required");
  for (int n : cfg.suite.frame_stacks) require(n >= 1, "suite.frame_stacks entries must be >= 1");
  try {
    for (const auto& k : cfg.suite.ipms) parse_ipm_kind(k);
    parse_ipm_kind(cfg.ipm);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto& names = canonical_names();
  const bool canonical = std::find(names.begin(), names.end(), cfg.instance) != names.end();
  if (!canonical && cfg.instance != "random") {
    require(std::filesystem::exists(cfg.instance), "instance file not found: " + cfg.instance);
  }
}

Pomdp resolve_instance(const ExperimentConfig& cfg) {
  const auto names = canonical_names();
  Pomdp p;
  if (std::find(names.begin(), names.end(), cfg.instance) != names.end()) {
    p = canonical_instance(cfg.instance);
  } else if (cfg.instance == "random") {
    p = generate_instance(cfg.random);
  } else {
    p = load_pomdp(cfg.instance);
  }
  if (cfg.gamma) p.discount = *cfg.gamma;
  require_valid(p);
  return p;
}

AgentStateMachine resolve_representation(const std::string& spec, const Pomdp& p) {
  const std::string prefix = "frame_stack:";
  if (spec.rfind(prefix, 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(spec.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ConfigError("bad representation '" + spec + "'");
    }
    if (n < 1) throw ConfigError("frame_stack needs n >= 1");
    return frame_stack(n, p);
  }
  if (!std::filesystem::exists(spec)) throw ConfigError("representation file not found: " + spec);
  AgentStateMachine m = load_machine(spec);
  if (m.n_obs != p.n_obs || m.n_actions != p.n_actions) {
    throw ConfigError("representation does not match the instance's |Y| and |A|");
  }
  return m;
}

AgentPolicy resolve_exploration(const std::string& spec, const AgentStateMachine& m, const Pomdp& p) {
  if (spec == "uniform") return uniform_policy(m.n_z, p.n_actions);
  std::ifstream in(spec);
  if (!in) throw ConfigError("exploration policy file not found: " + spec);
  const nlohmann::json j = nlohmann::json::parse(in);
  const auto rows = j.at("policy").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != m.n_z) throw ConfigError("exploration policy must have |Z| rows");
  AgentPolicy pol(m.n_z, p.n_actions);
  for (int z = 0; z < m.n_z; ++z) {
    if (static_cast<int>(rows[z].size()) != p.n_actions) throw ConfigError("exploration row has wrong length");
    for (int a = 0; a < p.n_actions; ++a) pol(z, a) = rows[z][a];
  }
  return pol;
}

}  // namespace rqlab
