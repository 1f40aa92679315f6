#include "rqlab/rql_ais.hpp"

#include "rqlab/bounds.hpp"
#include "rqlab/ipm.hpp"
#include "rqlab/report.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rqlab {

double EpsilonSchedule::operator()(long t) const {
  return end + (start - end) * std::exp(-static_cast<double>(t) / decay);
}

AisParameters AisParameters::zeros(int n_z, int n_actions, int n_obs, double lambda) {
  AisParameters params;
  params.r_hat = Matrix::Zero(n_z, n_actions);
  params.obs_logits = Matrix::Zero(static_cast<Eigen::Index>(n_z) * n_actions, n_obs);
  params.lambda = lambda;
  return params;
}

namespace {

Vector softmax(const Eigen::Ref<const Vector>& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

Matrix AisParameters::observation_predictor() const {
  Matrix out(obs_logits.rows(), obs_logits.cols());
  for (Eigen::Index r = 0; r < obs_logits.rows(); ++r) out.row(r) = softmax(obs_logits.row(r).transpose()).transpose();
  return out;
}

AisLoss ais_loss(const AisParameters& params, const std::vector<AisSample>& samples) {
  AisLoss loss;
  if (samples.empty()) return loss;
  const double lambda = params.lambda;
  const int A = params.n_actions();
  for (const AisSample& s : samples) {
    const double err = s.reward - params.r_hat(s.z, s.a);
    const Vector m = softmax(params.obs_logits.row(static_cast<Eigen::Index>(s.z) * A + s.a).transpose());
    loss.reward += s.weight * err * err;
    loss.observation += s.weight * (m.squaredNorm() - 2.0 * m(s.next_observation));
  }
  const double n = static_cast<double>(samples.size());
  loss.reward /= n;
  loss.observation /= n;
  loss.total = lambda * loss.reward + (1.0 - lambda) * loss.observation;
  return loss;
}

AisGradient ais_gradient(const AisParameters& params, const std::vector<AisSample>& samples) {
  AisGradient grad{Matrix::Zero(params.r_hat.rows(), params.r_hat.cols()),
                   Matrix::Zero(params.obs_logits.rows(), params.obs_logits.cols())};
  if (samples.empty()) return grad;
  const double lambda = params.lambda;
  const double n = static_cast<double>(samples.size());
  const int A = params.n_actions();
  for (const AisSample& s : samples) {
    grad.r_hat(s.z, s.a) += s.weight * 2.0 * lambda * (params.r_hat(s.z, s.a) - s.reward) / n;
    if (lambda == 1.0) continue;
    const Eigen::Index row = static_cast<Eigen::Index>(s.z) * A + s.a;
    const Vector m = softmax(params.obs_logits.row(row).transpose());
    // dL/dM = (1 - lambda)(2M - 2e_y), then through the softmax Jacobian.
    Vector g = 2.0 * (1.0 - lambda) * m;
    g(s.next_observation) -= 2.0 * (1.0 - lambda);
    const double mean = g.dot(m);
    grad.obs_logits.row(row) += (s.weight / n) * (m.array() * (g.array() - mean)).matrix().transpose();
  }
  return grad;
}

AisLoss ais_update(AisParameters& params, const std::vector<AisSample>& samples, double lr) {
  const AisLoss loss = ais_loss(params, samples);
  if (!std::isfinite(loss.total)) {
    std::ostringstream os;
    os << "AIS loss is not finite (reward " << loss.reward << ", observation " << loss.observation
       << ", batch " << samples.size() << ")";
    throw Error(os.str());
  }
  const AisGradient grad = ais_gradient(params, samples);
  params.r_hat -= lr * grad.r_hat;
  if (params.lambda != 1.0) params.obs_logits -= lr * grad.obs_logits;
  return loss;
}

AisLoss AisAdam::update(AisParameters& params, const std::vector<AisSample>& samples) {
  const AisLoss loss = ais_loss(params, samples);
  if (!std::isfinite(loss.total)) throw Error("AIS loss is not finite");
  const AisGradient grad = ais_gradient(params, samples);
  if (steps == 0) {
    m = {Matrix::Zero(grad.r_hat.rows(), grad.r_hat.cols()),
         Matrix::Zero(grad.obs_logits.rows(), grad.obs_logits.cols())};
    v = m;
  }
  ++steps;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  auto apply = [&](Matrix& param, const Matrix& g, Matrix& m1, Matrix& m2) {
    m1 = beta1 * m1 + (1.0 - beta1) * g;
    m2 = beta2 * m2 + (1.0 - beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
  };
  apply(params.r_hat, grad.r_hat, m.r_hat, v.r_hat);
  if (params.lambda != 1.0) apply(params.obs_logits, grad.obs_logits, m.obs_logits, v.obs_logits);
  return loss;
}

AisOptimizer parse_ais_optimizer(const std::string& name) {
  if (name == "adam") return AisOptimizer::Adam;
  if (name == "sgd") return AisOptimizer::Sgd;
  throw Error("unknown AIS optimizer '" + name + "' (expected adam or sgd)");
}

std::vector<int> burn_in_unroll(const ReplaySequence& seq, const AgentStateMachine& m) {
  std::vector<int> out;
  out.reserve(seq.main.size());
  int z = seq.initial_agent_state;
  const SequenceStep* prev = nullptr;
  auto fold = [&](const SequenceStep& step) {
    if (prev) z = m.next(z, step.observation, prev->action);
    prev = &step;
  };
  for (const SequenceStep& step : seq.burn_in) fold(step);
  for (const SequenceStep& step : seq.main) {
    fold(step);
    out.push_back(z);
  }
  return out;
}

double nstep_target(const ReplaySequence& seq, const std::vector<int>& zs, int k,
                    const AgentStateMachine& m, const Matrix& q, const Matrix& q_target,
                    const NStepOptions& opts) {
  const int L = static_cast<int>(seq.main.size());
  double ret = 0.0, discount = 1.0;
  for (int j = 0;; ++j) {
    const int idx = k + j;
    const SequenceStep& step = seq.main[idx];
    ret += discount * step.reward;
    discount *= opts.gamma;
    if (step.done) return ret;
    if (j + 1 == opts.n || idx + 1 == L) {
      const int z_next = idx + 1 < L ? zs[idx + 1] : m.next(zs[idx], seq.next_observation, step.action);
      const int a_star = argmax_lowest(q.row(z_next));
      return ret + discount * q_target(z_next, a_star);
    }
  }
}

NStepResult nstep_q_update(const std::vector<const ReplaySequence*>& batch,
                           const std::vector<std::vector<int>>& states,
                           const std::vector<double>& weights, const AgentStateMachine& m, Matrix& q,
                           const Matrix& q_target, const NStepOptions& opts) {
  NStepResult out;
  const Matrix snapshot = q;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ReplaySequence& seq = *batch[i];
    const std::vector<int>& zs = states[i];
    double abs_td = 0.0;
    for (int k = 0; k < static_cast<int>(seq.main.size()); ++k) {
      const double target = nstep_target(seq, zs, k, m, snapshot, q_target, opts);
      double& cell = q(zs[k], seq.main[k].action);
      const double td = target - cell;
      cell += opts.lr * weights[i] * td;
      abs_td += std::abs(td);
      ++out.updates;
    }
    out.mean_abs_td.push_back(seq.main.empty() ? 0.0 : abs_td / seq.main.size());
  }
  return out;
}

std::pair<double, double> evaluate_greedy(const Pomdp& p, const AgentStateMachine& m,
                                          const Matrix& q, int episodes, int max_length,
                                          double gamma, Rng& rng) {
  std::vector<double> returns;
  for (int e = 0; e < episodes; ++e) {
    const InitialDraw start = reset(p, rng);
    int s = start.state;
    int z = m.next(m.initial_z, start.observation, kNullAction);
    double ret = 0.0, discount = 1.0;
    for (int t = 0; t < max_length; ++t) {
      const int a = argmax_lowest(q.row(z));
      const StepResult r = step(p, s, a, rng);
      ret += discount * r.reward;
      discount *= gamma;
      if (p.is_terminal(r.next_state)) break;
      z = m.next(z, r.observation, a);
      s = r.next_state;
    }
    returns.push_back(ret);
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= episodes;
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  return {mean, episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0};
}

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

RqlAisRun train_rql_ais(const Pomdp& p, const AgentStateMachine& m, const RqlAisConfig& cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw Error("lambda must lie in [0, 1]");
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) throw Error("gamma must lie in [0, 1)");
  if (cfg.sequence_length < 1 || cfg.burn_in < 0 || cfg.nstep < 1 || cfg.batch_size < 1 ||
      cfg.update_every < 1 || cfg.target_sync < 1 || cfg.max_episode_length < 1) {
    throw Error("RQL-AIS sizes must be positive");
  }
  const int Z = m.n_z, A = p.n_actions;
  RqlAisRun run;
  run.q = Matrix::Zero(Z, A);
  run.ais = AisParameters::zeros(Z, A, p.n_obs, cfg.lambda);
  run.sample_counts = Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(Z, A);
  Matrix q_target = run.q;

  Rng master(cfg.seed);
  Rng env_rng = master.split(1);
  Rng replay_rng = master.split(2);
  Rng eval_rng = master.split(3);

  SequenceReplay buffer(cfg.buffer_capacity, cfg.prioritized ? cfg.per_alpha : 0.0);
  const NStepOptions nstep{cfg.nstep, cfg.gamma, cfg.q_lr};
  const IpmSpec obs_tv = IpmSpec::total_variation(p.n_obs);
  AisAdam adam;
  adam.lr = cfg.ais_lr;

  // Current episode.
  std::vector<SequenceStep> ep_steps;
  std::vector<int> ep_z;
  std::size_t emitted = 0;
  int s = 0, y = 0, z = 0;
  auto begin_episode = [&] {
    const InitialDraw start = reset(p, env_rng);
    s = start.state;
    y = start.observation;
    z = m.next(m.initial_z, y, kNullAction);
    ep_steps.clear();
    ep_z.clear();
    emitted = 0;
    ++run.episodes;
  };
  auto emit = [&](int next_obs) {
    ReplaySequence seq;
    const std::size_t lo = emitted >= static_cast<std::size_t>(cfg.burn_in) ? emitted - cfg.burn_in : 0;
    seq.burn_in.assign(ep_steps.begin() + lo, ep_steps.begin() + emitted);
    seq.main.assign(ep_steps.begin() + emitted, ep_steps.end());
    seq.initial_agent_state = ep_z[lo];
    seq.main_agent_state = ep_z[emitted];
    seq.next_observation = next_obs;
    seq.episode = run.episodes;
    buffer.add(std::move(seq));
    emitted = ep_steps.size();
  };

  double reward_loss_acc = 0.0, obs_loss_acc = 0.0;
  long loss_count = 0;
  auto log_eval = [&](long t) {
    AisLogRow row;
    row.step = t;
    std::tie(row.return_mean, row.return_std) =
        evaluate_greedy(p, m, run.q, cfg.eval_episodes, cfg.max_episode_length, cfg.gamma, eval_rng);
    row.reward_loss = loss_count ? reward_loss_acc / loss_count : 0.0;
    row.observation_loss = loss_count ? obs_loss_acc / loss_count : 0.0;
    row.epsilon = cfg.epsilon(t);
    row.buffer_size = buffer.size();
    const auto dt = delta_tilde_profile(p, m, run.ais.observation_predictor(), obs_tv, 3);
    row.delta_tilde = *std::max_element(dt.begin(), dt.end());
    run.log.push_back(row);
    reward_loss_acc = obs_loss_acc = 0.0;
    loss_count = 0;
  };

  auto learn = [&](long t) {
    const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(cfg.total_steps));
    const double beta = cfg.per_beta_start + (cfg.per_beta_end - cfg.per_beta_start) * frac;
    SequenceReplay::Batch batch;
    if (cfg.prioritized) {
      batch = buffer.sample(cfg.batch_size, beta, replay_rng);
    } else {
      for (int k = 0; k < cfg.batch_size; ++k) {
        batch.indices.push_back(replay_rng.uniform_int(buffer.size()));
        batch.weights.push_back(1.0);
      }
    }
    std::vector<const ReplaySequence*> seqs;
    std::vector<std::vector<int>> states;
    std::vector<AisSample> samples;
    for (std::size_t i = 0; i < batch.indices.size(); ++i) {
      const ReplaySequence& seq = buffer[batch.indices[i]];
      std::vector<int> zs = burn_in_unroll(seq, m);
      if (zs.front() != seq.main_agent_state) {
        throw Error("burn-in reconstruction does not reproduce the logged agent state");
      }
      ++run.burn_in_checks;
      for (std::size_t k = 0; k < seq.main.size(); ++k) {
        const int next_obs = k + 1 < seq.main.size() ? seq.main[k + 1].observation : seq.next_observation;
        samples.push_back({zs[k], seq.main[k].action, seq.main[k].reward, next_obs, batch.weights[i]});
        ++run.sample_counts(zs[k], seq.main[k].action);
      }
      seqs.push_back(&seq);
      states.push_back(std::move(zs));
    }
    const AisLoss loss = cfg.ais_optimizer == AisOptimizer::Adam ? adam.update(run.ais, samples)
                                                                 : ais_update(run.ais, samples, cfg.ais_lr);
    reward_loss_acc += loss.reward;
    obs_loss_acc += loss.observation;
    ++loss_count;
    const NStepResult td = nstep_q_update(seqs, states, batch.weights, m, run.q, q_target, nstep);
    if (cfg.prioritized) {
      for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        buffer.update_priority(batch.indices[i], td.mean_abs_td[i] + cfg.priority_epsilon);
      }
    }
    ++run.updates;
    if (run.updates % cfg.target_sync == 0) q_target = run.q;
  };

  begin_episode();
  for (long t = 1; t <= cfg.total_steps; ++t) {
    const double eps = cfg.epsilon(t - 1);
    const int a = env_rng.uniform() < eps ? static_cast<int>(env_rng.uniform_int(A))
                                          : argmax_lowest(run.q.row(z));
    const StepResult r = step(p, s, a, env_rng);
    const bool done = p.is_terminal(r.next_state);
    ep_steps.push_back({y, a, r.reward, done});
    ep_z.push_back(z);
    const bool truncated = !done && static_cast<int>(ep_steps.size()) >= cfg.max_episode_length;
    if (ep_steps.size() - emitted == static_cast<std::size_t>(cfg.sequence_length) || done || truncated) {
      emit(r.observation);
    }
    if (done || truncated) {
      begin_episode();
    } else {
      z = m.next(z, r.observation, a);
      y = r.observation;
      s = r.next_state;
    }
    if (t % cfg.update_every == 0 && t >= cfg.learning_starts && buffer.size() > 0) learn(t);
    if (cfg.eval_every > 0 && t % cfg.eval_every == 0) log_eval(t);
  }
  if (run.log.empty() || run.log.back().step != cfg.total_steps) log_eval(cfg.total_steps);
  run.final_return = run.log.back().return_mean;

  std::vector<double> neg_loss, returns;
  for (const AisLogRow& row : run.log) {
    neg_loss.push_back(-(row.reward_loss + row.observation_loss));
    returns.push_back(row.return_mean);
  }
  run.loss_return_correlation = pearson(neg_loss, returns);
  return run;
}

nlohmann::json to_json(const RqlAisRun& run) {
  nlohmann::json j;
  j["q"] = matrix_json(run.q);
  j["r_hat"] = matrix_json(run.ais.r_hat);
  j["observation_predictor"] = matrix_json(run.ais.observation_predictor());
  j["lambda"] = run.ais.lambda;
  j["updates"] = run.updates;
  j["episodes"] = run.episodes;
  j["burn_in_checks"] = run.burn_in_checks;
  j["final_return"] = run.final_return;
  j["loss_return_correlation"] = run.loss_return_correlation;
  return j;
}

}  // namespace rqlab
