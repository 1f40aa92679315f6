#include "rqlab/belief_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rqlab {

BeliefBounds::BeliefBounds(const Pomdp& p, const BeliefBoundOptions& opts) : p_(p), opts_(opts) {
  const int S = p.n_states, A = p.n_actions, Y = p.n_obs;
  const double g = p.discount;
  joint_.resize(static_cast<std::size_t>(A) * Y);
  for (int a = 0; a < A; ++a) {
    for (int y = 0; y < Y; ++y) {
      joint_[a * Y + y] = p.transition[a] * p.observation[a].col(y).asDiagonal();
    }
  }

  // Fast informed bound, iterated down from r_max / (1 - gamma).
  fib_ = Matrix::Constant(S, A, p.r_max() / (1.0 - g));
  for (int it = 0; it < 1'000'000; ++it) {
    Matrix next = p.reward;
    for (int a = 0; a < A; ++a) {
      for (int y = 0; y < Y; ++y) {
        next.col(a) += g * (joint_[a * Y + y] * fib_).rowwise().maxCoeff();
      }
    }
    const double diff = (fib_ - next).cwiseAbs().maxCoeff();
    fib_.swap(next);
    if (diff <= opts_.fib_tol) break;
  }
  corner_ = fib_.rowwise().maxCoeff();

  // Blind policies.
  for (int a = 0; a < A; ++a) {
    const Matrix system = Matrix::Identity(S, S) - g * p.transition[a];
    alphas_.push_back(system.partialPivLu().solve(Vector(p.reward.col(a))));
  }

  const double span = std::max(p.reward_span(), 1e-12);
  max_depth_ = g > 0 ? static_cast<int>(std::ceil(std::log(1e-12 * (1 - g) / span) / std::log(g))) : 1;
  max_depth_ = std::clamp(max_depth_, 1, 2000);
}

void BeliefBounds::add_lower_alpha(const Vector& alpha) { alphas_.push_back(alpha); }

double BeliefBounds::lower(const Belief& b) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const Vector& alpha : alphas_) best = std::max(best, alpha.dot(b));
  return best;
}

double BeliefBounds::sawtooth(const Belief& b) const {
  const double base = corner_.dot(b);
  double best = base;
  for (const auto& [point, value] : points_) {
    double phi = std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < b.size(); ++s) {
      if (point(s) > 0) phi = std::min(phi, b(s) / point(s));
    }
    best = std::min(best, base + phi * (value - corner_.dot(point)));
  }
  return best;
}

double BeliefBounds::upper(const Belief& b) const {
  return std::min((b.transpose() * fib_).maxCoeff(), sawtooth(b));
}

Interval BeliefBounds::value(const Belief& b) const {
  Interval v{lower(b), upper(b)};
  double lo = -std::numeric_limits<double>::infinity(), hi = lo;
  for (int a = 0; a < p_.n_actions; ++a) {
    const Interval q = q_value(b, a);
    lo = std::max(lo, q.lo);
    hi = std::max(hi, q.hi);
  }
  v.lo = std::max(v.lo, lo);
  v.hi = std::min(v.hi, hi);
  return v;
}

std::vector<BeliefBounds::Successor> BeliefBounds::successors(const Belief& b, int a) const {
  std::vector<Successor> out;
  const Vector pred = p_.transition[a].transpose() * b;
  for (int y = 0; y < p_.n_obs; ++y) {
    Vector joint = pred.cwiseProduct(p_.observation[a].col(y));
    const double py = joint.sum();
    if (!(py > 0.0)) {
      out.push_back({0.0, Belief()});
      continue;
    }
    joint /= py;
    out.push_back({py, std::move(joint)});
  }
  return out;
}

Interval BeliefBounds::q_value(const Belief& b, int a) const {
  const double r = expected_reward(p_, b, a);
  double lo = 0.0, hi = 0.0;
  for (const Successor& next : successors(b, a)) {
    if (next.prob == 0.0) continue;
    lo += next.prob * lower(next.belief);
    hi += next.prob * upper(next.belief);
  }
  return {r + p_.discount * lo, r + p_.discount * hi};
}

double BeliefBounds::upper_q(const Belief& b, int a) const { return q_value(b, a).hi; }

void BeliefBounds::backup(const Belief& b) {
  const int A = p_.n_actions, Y = p_.n_obs;
  const double g = p_.discount;

  // Lower bound: point-based alpha backup.
  Vector best_alpha;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < A; ++a) {
    Vector alpha = p_.reward.col(a);
    for (int y = 0; y < Y; ++y) {
      const Matrix& m = joint_[a * Y + y];
      const Vector weight = m.transpose() * b;
      std::size_t pick = 0;
      double pick_value = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < alphas_.size(); ++i) {
        const double v = alphas_[i].dot(weight);
        if (v > pick_value) {
          pick_value = v;
          pick = i;
        }
      }
      alpha += g * (m * alphas_[pick]);
    }
    const double v = alpha.dot(b);
    if (v > best_value) {
      best_value = v;
      best_alpha = std::move(alpha);
    }
  }
  if (best_value > lower(b) + 1e-13) alphas_.push_back(std::move(best_alpha));

  // Upper bound: Bellman backup of the current upper bound at b.
  double v = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < A; ++a) v = std::max(v, upper_q(b, a));
  if (!(v < upper(b) - 1e-13)) return;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    if (b(s) == 1.0) {
      corner_(s) = std::min(corner_(s), v);
      return;
    }
  }
  if (static_cast<long>(points_.size()) < opts_.max_points) points_.emplace_back(b, v);
}

void BeliefBounds::explore(const Belief& b, double target, int depth) {
  const double threshold = target * std::pow(p_.discount, -depth);
  if (depth >= max_depth_ || upper(b) - lower(b) <= threshold) return;

  int a_star = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < p_.n_actions; ++a) {
    const double q = upper_q(b, a);
    if (q > best) {
      best = q;
      a_star = a;
    }
  }
  const double next_threshold = threshold / p_.discount;
  const auto next = successors(b, a_star);
  int y_star = -1;
  double excess = 0.0;
  for (int y = 0; y < p_.n_obs; ++y) {
    if (next[y].prob == 0.0) continue;
    const double e = next[y].prob * (upper(next[y].belief) - lower(next[y].belief) - next_threshold);
    if (e > excess) {
      excess = e;
      y_star = y;
    }
  }
  if (y_star >= 0) explore(next[y_star].belief, target, depth + 1);
  backup(b);
}

double BeliefBounds::refine(const Belief& b, double target) {
  double gap = upper(b) - lower(b);
  int stalled = 0;
  for (long trial = 0; trial < opts_.max_trials && gap > target && stalled < 50; ++trial) {
    ++trials_;
    explore(b, target, 0);
    const double next_gap = upper(b) - lower(b);
    stalled = next_gap < gap ? 0 : stalled + 1;
    gap = next_gap;
  }
  return gap;
}

double BeliefBounds::refine_q(const Belief& b, int a, double target) {
  if (p_.discount == 0.0) return 0.0;
  for (const Successor& next : successors(b, a)) {
    if (next.prob > 0.0) refine(next.belief, target);
  }
  return q_value(b, a).width();
}

}  // namespace rqlab
