#pragma once

#include "rqlab/rng.hpp"

#include <cstdint>
#include <vector>

namespace rqlab {

struct SequenceStep {
  int observation = 0;  // y_t
  int action = 0;       // a_t
  double reward = 0.0;  // R_t
  bool done = false;    // the transition after this step ended the episode
};

/// Stored sequence: burn-in prefix followed by the trained segment.
struct ReplaySequence {
  std::vector<SequenceStep> burn_in;
  std::vector<SequenceStep> main;
  /// Agent state at the first stored step (after folding its observation).
  int initial_agent_state = 0;
  /// Agent state the collector had at the first main step.
  int main_agent_state = 0;
  /// Observation following the last main step (always present; at a terminal
  /// transition it is the terminal state's observation).
  int next_observation = 0;
  long episode = 0;
  double priority = 1.0;
};

/// Complete binary tree over `capacity` leaves holding sums.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity = 0);
  void set(std::size_t i, double value);
  double get(std::size_t i) const { return tree_[leaves_ + i]; }
  double total() const { return tree_[1]; }
  /// Leaf i with prefix(i) <= u < prefix(i + 1); u in [0, total()).
  std::size_t find(double u) const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_ = 0, leaves_ = 1;
  std::vector<double> tree_;
};

/// Same layout holding minima (empty leaves are +inf).
class MinTree {
 public:
  explicit MinTree(std::size_t capacity = 0);
  void set(std::size_t i, double value);
  double min() const { return tree_[1]; }

 private:
  std::size_t leaves_ = 1;
  std::vector<double> tree_;
};

/// FIFO sequence buffer with proportional prioritized sampling.
class SequenceReplay {
 public:
  SequenceReplay(std::size_t capacity, double alpha);

  /// New sequences enter with the largest priority seen so far.
  void add(ReplaySequence seq);
  void update_priority(std::size_t index, double priority);

  struct Batch {
    std::vector<std::size_t> indices;
    std::vector<double> weights;  // (N P(i))^-beta / max_j (N P(j))^-beta
  };
  Batch sample(std::size_t batch_size, double beta, Rng& rng) const;

  /// P(i) = p_i^alpha / sum_j p_j^alpha.
  double probability(std::size_t index) const;
  std::size_t size() const { return size_; }
  const ReplaySequence& operator[](std::size_t i) const { return items_[i]; }
  double alpha() const { return alpha_; }
  double max_priority() const { return max_priority_; }

 private:
  std::size_t capacity_, size_ = 0, next_ = 0;
  double alpha_;
  double max_priority_ = 1.0;
  std::vector<ReplaySequence> items_;
  SumTree sum_;
  MinTree min_;
};

}  // namespace rqlab
