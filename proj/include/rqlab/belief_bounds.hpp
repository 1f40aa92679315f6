#pragma once

#include "rqlab/pomdp.hpp"
#include "rqlab/types.hpp"

#include <vector>

namespace rqlab {

struct BeliefBoundOptions {
  /// Stop the fast-informed-bound iteration once successive iterates differ by
  /// less than this (every iterate is already an upper bound).
  double fib_tol = 1e-10;
  long max_trials = 4000;
  long max_points = 50'000;
};

/// Certified lower and upper bounds on the optimal value V*(b) of the belief
/// MDP of a discounted POMDP, tightened by heuristic search trials.
///
/// Lower bound: max over alpha vectors, each the exact value of some policy
/// (blind policies, user supplied controllers and their point backups).
/// Upper bound: min of the fast informed bound and a sawtooth interpolation
/// through corner values and backed-up belief points.
class BeliefBounds {
 public:
  explicit BeliefBounds(const Pomdp& p, const BeliefBoundOptions& opts = {});

  /// `alpha` must be the value vector of an actual policy (or below one).
  void add_lower_alpha(const Vector& alpha);

  double lower(const Belief& b) const;
  double upper(const Belief& b) const;
  Interval value(const Belief& b) const;
  /// r(b, a) + gamma sum_y P(y | b, a) [lower, upper](b^{a,y}).
  Interval q_value(const Belief& b, int a) const;

  /// Search trials from b until the value gap is <= target or the trial
  /// budget runs out. Returns the final gap.
  double refine(const Belief& b, double target);
  /// Refines so that the gap of q_value(b, a) is <= target.
  double refine_q(const Belief& b, int a, double target);

  std::size_t n_alphas() const { return alphas_.size(); }
  std::size_t n_points() const { return points_.size(); }
  long trials() const { return trials_; }
  const Matrix& fib() const { return fib_; }

 private:
  struct Successor {
    double prob;
    Belief belief;
  };
  std::vector<Successor> successors(const Belief& b, int a) const;
  double sawtooth(const Belief& b) const;
  double upper_q(const Belief& b, int a) const;
  void explore(const Belief& b, double target, int depth);
  void backup(const Belief& b);

  const Pomdp& p_;
  BeliefBoundOptions opts_;
  int max_depth_ = 0;
  long trials_ = 0;
  // joint_[a * |Y| + y](s, s') = P(s'|s,a) O(y|s',a)
  std::vector<Matrix> joint_;
  Matrix fib_;  // |S| x |A|
  Vector corner_;
  std::vector<Vector> alphas_;
  std::vector<std::pair<Belief, double>> points_;
};

}  // namespace rqlab
