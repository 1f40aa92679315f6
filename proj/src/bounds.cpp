#include "rqlab/bounds.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace rqlab {

Vector next_agent_state_law(const Pomdp& p, const AgentStateMachine& m, const Belief& b, int z,
                            int a) {
  const Vector pred = p.transition[a].transpose() * b;
  Vector out = Vector::Zero(m.n_z);
  for (int y = 0; y < p.n_obs; ++y) out(m.next(z, y, a)) += pred.dot(p.observation[a].col(y));
  return out;
}

namespace {

void require_certifiable(const IpmSpec& spec) {
  if (spec.kind == IpmKind::Mmd) {
    throw Unsupported("MMD has no computable Minkowski functional; certificates need tv or wasserstein");
  }
}

}  // namespace

ErrorProfile epsilon_delta_profile(const HistoryTree& tree, const Pomdp& p,
                                   const AgentStateMachine& m, const StationaryModel& sm,
                                   const IpmSpec& spec) {
  require_certifiable(spec);
  if (spec.size() != m.n_z) throw Error("IPM must live on the agent-state space");
  ErrorProfile out;
  for (int t = 1; t <= tree.max_depth; ++t) {
    double eps = 0.0, delta = 0.0, eps_r = 0.0, delta_r = 0.0;
    for (int v = tree.begin(t); v < tree.end(t); ++v) {
      const HistoryNode& node = tree.nodes[v];
      for (int a = 0; a < p.n_actions; ++a) {
        const double e = std::abs(expected_reward(p, node.belief, a) - sm.r_xi(node.agent_state, a));
        const Vector law = next_agent_state_law(p, m, node.belief, node.agent_state, a);
        const Vector row = sm.p_xi.row(sm.row(node.agent_state, a)).transpose();
        const double d = ipm_distance(spec, law, row);
        eps = std::max(eps, e);
        delta = std::max(delta, d);
        if (sm.reachable(node.agent_state, a)) {
          eps_r = std::max(eps_r, e);
          delta_r = std::max(delta_r, d);
        }
      }
    }
    out.epsilon.push_back(eps);
    out.delta.push_back(delta);
    out.epsilon_reachable.push_back(eps_r);
    out.delta_reachable.push_back(delta_r);
    out.histories.push_back(tree.end(t) - tree.begin(t));
  }
  return out;
}

ErrorProfile epsilon_delta_profile(const Pomdp& p, const AgentStateMachine& m,
                                   const StationaryModel& sm, const IpmSpec& spec, int t_max) {
  const HistoryTree tree = enumerate_histories(p, m, uniform_policy(m.n_z, p.n_actions), t_max);
  return epsilon_delta_profile(tree, p, m, sm, spec);
}

std::vector<double> delta_tilde_profile(const HistoryTree& tree, const Pomdp& p,
                                        const Matrix& predictor, const IpmSpec& spec) {
  if (spec.size() != p.n_obs) throw Error("IPM must live on the observation space");
  std::vector<double> out;
  for (int t = 1; t <= tree.max_depth; ++t) {
    double worst = 0.0;
    for (int v = tree.begin(t); v < tree.end(t); ++v) {
      const HistoryNode& node = tree.nodes[v];
      for (int a = 0; a < p.n_actions; ++a) {
        const Vector truth = observation_distribution(p, node.belief, a);
        const Vector pred =
            predictor.row(static_cast<Eigen::Index>(node.agent_state) * p.n_actions + a).transpose();
        worst = std::max(worst, ipm_distance(spec, truth, pred));
      }
    }
    out.push_back(worst);
  }
  return out;
}

std::vector<double> delta_tilde_profile(const Pomdp& p, const AgentStateMachine& m,
                                        const Matrix& predictor, const IpmSpec& spec, int t_max) {
  const HistoryTree tree = enumerate_histories(p, m, uniform_policy(m.n_z, p.n_actions), t_max);
  return delta_tilde_profile(tree, p, predictor, spec);
}

Aggregate aggregate(const std::vector<double>& values, double gamma, double tail, int t_out) {
  const int T = static_cast<int>(values.size());
  Aggregate out;
  for (int t = 1; t <= t_out; ++t) {
    double sum = 0.0, peak = tail, weight = 1.0;
    for (int tau = t; tau <= T; ++tau) {
      sum += weight * values[tau - 1];
      peak = std::max(peak, values[tau - 1]);
      weight *= gamma;
    }
    // weight is now gamma^{max(T - t + 1, 0)}
    out.bar.push_back((1.0 - gamma) * sum + weight * tail);
    out.sup.push_back(peak);
  }
  return out;
}

Aggregate aggregate(const std::vector<double>& values, double gamma, double tail) {
  return aggregate(values, gamma, tail, static_cast<int>(values.size()));
}

RhoBound instance_independent_rho(const IpmSpec& spec, const Pomdp& p, const StationaryModel& sm,
                                  double gamma) {
  RhoBound out;
  switch (spec.kind) {
    case IpmKind::TotalVariation:
      out.applicable = true;
      out.value = p.reward_span() / (1.0 - gamma);
      out.note = "span(r) / (1 - gamma)";
      return out;
    case IpmKind::Wasserstein: {
      const int Z = sm.n_z(), A = sm.n_actions();
      double lr = 0.0, lp = 0.0;
      for (int a = 0; a < A; ++a) {
        for (int z = 0; z < Z; ++z) {
          for (int w = z + 1; w < Z; ++w) {
            const double d = spec.metric(z, w);
            if (!(d > 0.0)) throw Error("Lipschitz bounds need a positive off-diagonal metric");
            lr = std::max(lr, std::abs(sm.r_xi(z, a) - sm.r_xi(w, a)) / d);
            const Vector pz = sm.p_xi.row(sm.row(z, a)).transpose();
            const Vector pw = sm.p_xi.row(sm.row(w, a)).transpose();
            lp = std::max(lp, wasserstein(spec.metric, pz, pw) / d);
          }
        }
      }
      out.lipschitz_reward = lr;
      out.lipschitz_transition = lp;
      if (gamma * lp < 1.0) {
        out.applicable = true;
        out.value = lr / (1.0 - gamma * lp);
        out.note = "L_r / (1 - gamma L_P)";
      } else {
        out.note = "bound inapplicable: gamma L_P >= 1";
      }
      return out;
    }
    case IpmKind::Mmd: break;
  }
  out.note = "unsupported for mmd";
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Certified: return "certified";
    case Verdict::Violated: return "violated";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

bool BoundCertificate::all_certified() const {
  for (const auto& [kind, t] : tally) {
    if (t.violated || t.inconclusive) return false;
  }
  return !tally.empty();
}

HistoryTree enumerate_within_budget(const Pomdp& p, const AgentStateMachine& m,
                                    const AgentPolicy& policy, int t_max, long budget,
                                    int min_depth) {
  HistoryTree best = enumerate_histories(p, m, policy, min_depth);
  for (int d = min_depth + 1; d <= t_max; ++d) {
    try {
      best = enumerate_histories(p, m, policy, d, budget);
    } catch (const SizeError&) {
      break;
    }
  }
  return best;
}

CertificationContext make_certification_context(const Pomdp& p, const AgentStateMachine& m,
                                                const StationaryModel& sm, const QTable& q_xi,
                                                const CertifyOptions& opts) {
  if (opts.t_cert < 1 || opts.t_dp < opts.t_cert) throw Error("need 1 <= T_cert <= T_dp");
  CertificationContext ctx;
  ctx.p = &p;
  ctx.m = &m;
  ctx.sm = &sm;
  ctx.q_xi = q_xi;
  ctx.opts = opts;
  const AgentPolicy uniform = uniform_policy(m.n_z, p.n_actions);
  ctx.profile_tree = enumerate_within_budget(p, m, uniform, opts.t_dp, opts.profile_budget, opts.t_cert);

  int horizon = opts.t_cert;
  while (horizon < opts.t_dp &&
         history_count_upper_bound(p.n_obs, p.n_actions, horizon + 1) <= opts.sandwich_budget) {
    ++horizon;
  }
  HistoryDpOptions dp;
  dp.store_depth = opts.t_cert;
  ctx.sandwich = solve_history_dp(p, m, horizon, std::nullopt, dp);

  ctx.induced_policy = q_xi.greedy_policy();
  ctx.policy_values = evaluate_agent_policy(p, m, ctx.induced_policy);
  ctx.bounds = std::make_unique<BeliefBounds>(p, opts.belief);
  for (int z = 0; z < m.n_z; ++z) ctx.bounds->add_lower_alpha(ctx.policy_values.col(z));
  return ctx;
}

namespace {

Interval intersect(const Interval& a, const Interval& b, const char* what) {
  Interval out{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
  if (out.lo > out.hi + 1e-9) {
    std::ostringstream os;
    os << std::setprecision(17) << "inconsistent " << what << " bounds: [" << a.lo << ", " << a.hi
       << "] vs [" << b.lo << ", " << b.hi << "]";
    throw Error(os.str());
  }
  if (out.lo > out.hi) out.lo = out.hi = 0.5 * (out.lo + out.hi);
  return out;
}

}  // namespace

BoundCertificate certify(CertificationContext& ctx, const IpmSpec& spec) {
  require_certifiable(spec);
  const Pomdp& p = *ctx.p;
  const AgentStateMachine& m = *ctx.m;
  const StationaryModel& sm = *ctx.sm;
  const CertifyOptions& opts = ctx.opts;
  const double g = p.discount;

  BoundCertificate c;
  c.kind = spec.kind;
  c.gamma = g;
  c.t_cert = opts.t_cert;
  c.profile = epsilon_delta_profile(ctx.profile_tree, p, m, sm, spec);
  c.epsilon_tail = p.reward_span();
  c.delta_tail = spec.diameter();
  c.epsilon_agg = aggregate(c.profile.epsilon, g, c.epsilon_tail, opts.t_cert);
  c.delta_agg = aggregate(c.profile.delta, g, c.delta_tail, opts.t_cert);
  const Vector v_xi = ctx.q_xi.greedy_value();
  c.rho_value = rho(spec, v_xi);
  c.rho_bound = instance_independent_rho(spec, p, sm, g);
  for (int t = 1; t <= opts.t_cert; ++t) {
    c.rhs.push_back((c.epsilon_agg.bar[t - 1] + g * c.delta_agg.bar[t - 1] * c.rho_value) / (1.0 - g));
  }
  c.worst_lhs.assign(opts.t_cert, 0.0);
  c.worst_slack = std::numeric_limits<double>::infinity();

  const HistoryValueTable& dp = ctx.sandwich;
  BeliefBounds& bb = *ctx.bounds;
  // `range` is the LHS interval; `width` is the width of the underlying
  // value interval, which decides between certified and inconclusive.
  auto record = [&](BoundCheck check, const Interval& range, double bound, double width) {
    check.rhs = bound;
    check.lhs = range;
    check.worst = range.hi;
    if (range.lo > bound + opts.slack) {
      check.verdict = Verdict::Violated;
    } else if (check.worst <= bound + opts.slack &&
               width <= opts.inconclusive_fraction * bound + opts.slack) {
      check.verdict = Verdict::Certified;
    } else {
      check.verdict = Verdict::Inconclusive;
    }
    CheckTally& tally = (check.gated ? c.tally : c.tally_ungated)[check.kind];
    if (check.verdict == Verdict::Certified) ++tally.certified;
    if (check.verdict == Verdict::Violated) ++tally.violated;
    if (check.verdict == Verdict::Inconclusive) ++tally.inconclusive;
    if (check.gated) {
      c.worst_slack = std::min(c.worst_slack, bound - check.worst);
      if (check.kind != "policy") {
        c.worst_lhs[check.depth - 1] = std::max(c.worst_lhs[check.depth - 1], check.worst);
      }
    }
    c.checks.push_back(std::move(check));
  };
  auto make_check = [](const char* kind, int t, int node, int z, int a, bool gated,
                       const std::string& history) {
    BoundCheck check;
    check.kind = kind;
    check.depth = t;
    check.node = node;
    check.agent_state = z;
    check.action = a;
    check.gated = gated;
    check.history = history;
    return check;
  };
  // Interval of |x - centre| for x in `range`.
  auto distance_range = [](const Interval& range, double centre) {
    const double worst = std::max(std::abs(range.lo - centre), std::abs(range.hi - centre));
    double best = 0.0;
    if (centre < range.lo) best = range.lo - centre;
    if (centre > range.hi) best = centre - range.hi;
    return Interval{best, worst};
  };

  for (int t = 1; t <= opts.t_cert; ++t) {
    const double rhs = c.rhs[t - 1];
    const double target = std::max(opts.refine_fraction * rhs, 1e-9);
    for (int v = dp.tree.begin(t); v < dp.tree.end(t); ++v) {
      const HistoryNode& node = dp.tree.nodes[v];
      const int z = node.agent_state;
      const std::string hist = dp.tree.history(v).to_string();
      bool z_reachable = false;
      double v_lo = -std::numeric_limits<double>::infinity(), v_hi = v_lo;
      for (int a = 0; a < p.n_actions; ++a) {
        bb.refine_q(node.belief, a, target);
        const Interval q = intersect(bb.q_value(node.belief, a),
                                     sandwich_interval(dp.q_star(v, a), t, dp.horizon, p), "Q");
        v_lo = std::max(v_lo, q.lo);
        v_hi = std::max(v_hi, q.hi);
        z_reachable = z_reachable || sm.reachable(z, a);
        record(make_check("Q", t, v, z, a, sm.reachable(z, a), hist), distance_range(q, ctx.q_xi.q(z, a)), rhs, q.width());
      }
      Interval value{v_lo, v_hi};
      value = intersect(value, bb.value(node.belief), "V");
      value = intersect(value, sandwich_interval(dp.v_star(v), t, dp.horizon, p), "V");

      record(make_check("V", t, v, z, -1, z_reachable, hist), distance_range(value, v_xi(z)), rhs, value.width());

      const double v_pi = node.belief.dot(ctx.policy_values.col(z));
      record(make_check("policy", t, v, z, -1, z_reachable, hist), Interval{value.lo - v_pi, value.hi - v_pi}, 2.0 * rhs, value.width());
    }
  }
  if (!std::isfinite(c.worst_slack)) c.worst_slack = 0.0;

  auto& conv = c.conventions;
  conv["first_step"] = "y1 ~ O(.|s1, a=0); z1 = f(z0, y1, 0); b1 ~ mu0 * O(y1|., 0)";
  conv["history_set"] =
      "eps/delta maxima over every positive-probability history under the uniform policy, "
      "including histories whose agent state is not xi-reachable (completed induced model)";
  conv["gating"] = "verdicts count toward pass/fail only when (sigma_t(h), a) is xi-reachable";
  conv["profile_depth"] = std::to_string(c.profile.depth());
  conv["sandwich_horizon"] = std::to_string(dp.horizon);
  conv["t_dp_requested"] = std::to_string(opts.t_dp);
  conv["t_cert"] = std::to_string(opts.t_cert);
  conv["q_star_intervals"] =
      "belief-space lower/upper bounds intersected with the finite-horizon sandwich";
  conv["inconclusive_rule"] = "interval width above 1% of the bound";
  return c;
}

BoundCertificate certify(const Pomdp& p, const AgentStateMachine& m, const StationaryModel& sm,
                         const QTable& q_xi, const IpmSpec& spec, const CertifyOptions& opts) {
  require_certifiable(spec);
  CertificationContext ctx = make_certification_context(p, m, sm, q_xi, opts);
  return certify(ctx, spec);
}

nlohmann::json to_json(const BoundCertificate& c, bool include_checks) {
  using nlohmann::json;
  json j;
  j["ipm"] = to_string(c.kind);
  j["gamma"] = c.gamma;
  j["t_cert"] = c.t_cert;
  j["epsilon"] = c.profile.epsilon;
  j["delta"] = c.profile.delta;
  j["epsilon_reachable"] = c.profile.epsilon_reachable;
  j["delta_reachable"] = c.profile.delta_reachable;
  j["histories_per_depth"] = c.profile.histories;
  j["epsilon_tail"] = c.epsilon_tail;
  j["delta_tail"] = c.delta_tail;
  j["epsilon_bar"] = c.epsilon_agg.bar;
  j["delta_bar"] = c.delta_agg.bar;
  j["epsilon_sup"] = c.epsilon_agg.sup;
  j["delta_sup"] = c.delta_agg.sup;
  j["rho_value"] = c.rho_value;
  j["rho_bound"] = {{"applicable", c.rho_bound.applicable},
                    {"value", c.rho_bound.value},
                    {"lipschitz_reward", c.rho_bound.lipschitz_reward},
                    {"lipschitz_transition", c.rho_bound.lipschitz_transition},
                    {"note", c.rho_bound.note}};
  j["rhs"] = c.rhs;
  j["worst_lhs"] = c.worst_lhs;
  j["worst_slack"] = c.worst_slack;
  auto tallies = [](const std::map<std::string, CheckTally>& m) {
    json out = json::object();
    for (const auto& [k, t] : m) {
      out[k] = {{"certified", t.certified}, {"violated", t.violated}, {"inconclusive", t.inconclusive}};
    }
    return out;
  };
  j["verdicts"] = tallies(c.tally);
  j["verdicts_unreachable"] = tallies(c.tally_ungated);
  j["all_certified"] = c.all_certified();
  j["conventions"] = c.conventions;
  if (include_checks) {
    json checks = json::array();
    for (const BoundCheck& k : c.checks) {
      checks.push_back({{"kind", k.kind},
                        {"t", k.depth},
                        {"history", k.history},
                        {"z", k.agent_state},
                        {"a", k.action},
                        {"gated", k.gated},
                        {"lhs", {k.lhs.lo, k.lhs.hi}},
                        {"rhs", k.rhs},
                        {"verdict", to_string(k.verdict)}});
    }
    j["checks"] = checks;
  }
  return j;
}

std::string certificate_csv(const BoundCertificate& c) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "t,epsilon,delta,epsilon_bar,delta_bar,rhs,worst_lhs,verdict\n";
  for (int t = 1; t <= c.t_cert; ++t) {
    Verdict worst = Verdict::Certified;
    for (const BoundCheck& k : c.checks) {
      if (k.depth != t || !k.gated) continue;
      if (k.verdict == Verdict::Violated) worst = Verdict::Violated;
      if (k.verdict == Verdict::Inconclusive && worst == Verdict::Certified) worst = Verdict::Inconclusive;
    }
    const double eps = t <= c.profile.depth() ? c.profile.epsilon[t - 1] : c.epsilon_tail;
    const double delta = t <= c.profile.depth() ? c.profile.delta[t - 1] : c.delta_tail;
    os << t << ',' << eps << ',' << delta << ',' << c.epsilon_agg.bar[t - 1] << ','
       << c.delta_agg.bar[t - 1] << ',' << c.rhs[t - 1] << ',' << c.worst_lhs[t - 1] << ','
       << to_string(worst) << '\n';
  }
  return os.str();
}

}  // namespace rqlab
