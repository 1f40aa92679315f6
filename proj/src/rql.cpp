#include "rqlab/rql.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rqlab {

RateMode parse_rate_mode(const std::string& name) {
  if (name == "a3" || name == "A3") return RateMode::A3;
  if (name == "a3p" || name == "A3'" || name == "a3'" || name == "power") return RateMode::A3Power;
  throw Error("unknown rate mode '" + name + "' (expected a3 or a3p)");
}

std::string to_string(RateMode mode) { return mode == RateMode::A3 ? "a3" : "a3p"; }

double learning_rate(RateMode mode, long visits_before, double power) {
  const double n = 1.0 + static_cast<double>(visits_before);
  return mode == RateMode::A3 ? 1.0 / n : 1.0 / std::pow(n, power);
}

double rql_initial_value(const Pomdp& p) {
  if (p.r_min() <= 0.0 && p.r_max() >= 0.0) return 0.0;
  return 0.5 * (p.r_min() + p.r_max()) / (1.0 - p.discount);
}

RqlRun rql_train(const Pomdp& p, const AgentStateMachine& m, const AgentPolicy& explore,
                 const RqlOptions& opts, const QTable* q_xi) {
  const int Z = m.n_z, A = p.n_actions;
  if (explore.rows() != Z || explore.cols() != A) throw Error("exploration policy must be |Z| x |A|");
  if (opts.rate == RateMode::A3Power && !(opts.power > 0.5 && opts.power <= 1.0)) {
    throw Error("A3' power must lie in (0.5, 1]");
  }
  const double g = p.discount;
  RqlRun run;
  run.seed = opts.seed;
  run.q.q = Matrix::Constant(Z, A, rql_initial_value(p));
  run.q.reachable = Mask::Constant(Z, A, true);
  run.visits = Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(Z, A);
  run.q_min_seen = run.q_max_seen = run.q.q(0, 0);
  if (opts.track_transitions) {
    run.transition_counts = Matrix::Zero(static_cast<Eigen::Index>(Z) * A, Z);
    run.reward_by_next = Matrix::Zero(static_cast<Eigen::Index>(Z) * A, Z);
    run.reward_sq = Vector::Zero(static_cast<Eigen::Index>(Z) * A);
  }
  const double scale = std::max(std::abs(p.r_min()), std::abs(p.r_max()));
  const double limit = opts.divergence_factor * std::max(scale, 1e-12) / (1.0 - g);

  std::vector<long> marks = opts.checkpoints;
  std::sort(marks.begin(), marks.end());
  std::size_t next_mark = 0;
  while (next_mark < marks.size() && marks[next_mark] <= 0) ++next_mark;

  auto log_now = [&](long step) {
    RqlCheckpoint cp;
    cp.step = step;
    cp.gap = q_xi ? reachable_sup_norm(run.q.q, q_xi->q, q_xi->reachable)
                  : std::numeric_limits<double>::quiet_NaN();
    cp.visited_fraction = static_cast<double>((run.visits > 0).count()) / (Z * A);
    run.log.push_back(cp);
  };

  Rng rng(opts.seed);
  const InitialDraw start = reset(p, rng);
  int s = start.state;
  int z = m.next(m.initial_z, start.observation, kNullAction);
  Vector v_hat = run.q.q.rowwise().maxCoeff();

  for (long t = 1; t <= opts.steps; ++t) {
    const int a = sample_categorical(explore.row(z), rng);
    const StepResult r = step(p, s, a, rng);
    const int z2 = m.next(z, r.observation, a);
    long& n = run.visits(z, a);
    const double alpha = learning_rate(opts.rate, n, opts.power);
    ++n;
    double& cell = run.q.q(z, a);
    cell += alpha * (r.reward + g * v_hat(z2) - cell);
    v_hat(z) = run.q.q.row(z).maxCoeff();
    run.q_min_seen = std::min(run.q_min_seen, cell);
    run.q_max_seen = std::max(run.q_max_seen, cell);
    if (!(std::abs(cell) <= limit)) {
      std::ostringstream os;
      os << "RQL diverged at step " << t << ": Q(" << z << ", " << a << ") = " << cell
         << " exceeds " << limit;
      throw NonConvergence(os.str(), std::abs(cell));
    }
    if (opts.track_transitions) {
      const auto row = static_cast<Eigen::Index>(z) * A + a;
      run.transition_counts(row, z2) += 1.0;
      run.reward_by_next(row, z2) += r.reward;
      run.reward_sq(row) += r.reward * r.reward;
    }
    s = r.next_state;
    z = z2;
    run.steps = t;
    bool logged = false;
    if (next_mark < marks.size() && marks[next_mark] == t) {
      log_now(t);
      logged = true;
      while (next_mark < marks.size() && marks[next_mark] <= t) ++next_mark;
    }
    if (!logged && opts.eval_every > 0 && t % opts.eval_every == 0) {
      log_now(t);
      logged = true;
    }
    if (!logged && t == opts.steps) log_now(t);
  }
  run.q.iterations = run.steps;
  return run;
}

W2Diagnostic w2_diagnostic(const RqlRun& run, const QTable& q_xi, const StationaryModel& sm,
                           double gamma) {
  if (run.transition_counts.size() == 0) throw Error("run was trained without transition tracking");
  const int Z = q_xi.n_z(), A = q_xi.n_actions();
  const Vector v = q_xi.greedy_value();
  W2Diagnostic out;
  out.mean = Matrix::Zero(Z, A);
  out.std_error = Matrix::Zero(Z, A);
  out.visited = Mask::Constant(Z, A, false);
  for (int z = 0; z < Z; ++z) {
    for (int a = 0; a < A; ++a) {
      const auto row = static_cast<Eigen::Index>(z) * A + a;
      const double n = run.transition_counts.row(row).sum();
      if (n < 1) continue;
      out.visited(z, a) = true;
      // X = R + gamma V(z'); the diagnostic is mean(X) - (r_xi + gamma P_xi V).
      const double sum_r = run.reward_by_next.row(row).sum();
      const double sum_v = run.transition_counts.row(row).dot(v);
      const double sum_rv = run.reward_by_next.row(row).dot(v);
      const double sum_vv = run.transition_counts.row(row).dot(v.cwiseProduct(v));
      const double mean_x = (sum_r + gamma * sum_v) / n;
      const double mean_xx = (run.reward_sq(row) + 2 * gamma * sum_rv + gamma * gamma * sum_vv) / n;
      const double target = sm.r_xi(z, a) + gamma * sm.p_xi.row(sm.row(z, a)).dot(v);
      out.mean(z, a) = mean_x - target;
      out.std_error(z, a) = std::sqrt(std::max(0.0, mean_xx - mean_x * mean_x) / n);
    }
  }
  return out;
}

double visit_tv(const RqlRun& run, const StationaryModel& sm) {
  const Matrix freq = run.visits.cast<double>().matrix() / static_cast<double>(run.steps);
  return 0.5 * (freq - sm.xi_za).cwiseAbs().sum();
}

}  // namespace rqlab
