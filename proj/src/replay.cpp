#include "rqlab/replay.hpp"

#include "rqlab/types.hpp"

#include <cmath>
#include <limits>

namespace rqlab {

namespace {

std::size_t leaf_count(std::size_t capacity) {
  std::size_t n = 1;
  while (n < capacity) n <<= 1;
  return n;
}

}  // namespace

SumTree::SumTree(std::size_t capacity)
    : capacity_(capacity), leaves_(leaf_count(capacity)), tree_(2 * leaves_, 0.0) {}

void SumTree::set(std::size_t i, double value) {
  std::size_t k = leaves_ + i;
  tree_[k] = value;
  for (k >>= 1; k >= 1; k >>= 1) tree_[k] = tree_[2 * k] + tree_[2 * k + 1];
}

std::size_t SumTree::find(double u) const {
  std::size_t k = 1;
  while (k < leaves_) {
    const double left = tree_[2 * k];
    if (u < left || tree_[2 * k + 1] <= 0.0) {
      k = 2 * k;
    } else {
      u -= left;
      k = 2 * k + 1;
    }
  }
  std::size_t i = k - leaves_;
  // Guard against rounding that lands on an empty leaf.
  while (i > 0 && tree_[leaves_ + i] <= 0.0) --i;
  return i;
}

MinTree::MinTree(std::size_t capacity)
    : leaves_(leaf_count(capacity)), tree_(2 * leaves_, std::numeric_limits<double>::infinity()) {}

void MinTree::set(std::size_t i, double value) {
  std::size_t k = leaves_ + i;
  tree_[k] = value;
  for (k >>= 1; k >= 1; k >>= 1) tree_[k] = std::min(tree_[2 * k], tree_[2 * k + 1]);
}

SequenceReplay::SequenceReplay(std::size_t capacity, double alpha)
    : capacity_(capacity), alpha_(alpha), sum_(capacity), min_(capacity) {
  if (capacity == 0) throw Error("replay capacity must be positive");
  items_.resize(capacity);
}

void SequenceReplay::add(ReplaySequence seq) {
  seq.priority = max_priority_;
  items_[next_] = std::move(seq);
  update_priority(next_, max_priority_);
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void SequenceReplay::update_priority(std::size_t index, double priority) {
  if (!(priority >= 0.0) || !std::isfinite(priority)) throw Error("priority must be finite and >= 0");
  items_[index].priority = priority;
  const double scaled = std::pow(priority, alpha_);
  sum_.set(index, scaled);
  min_.set(index, scaled > 0.0 ? scaled : std::numeric_limits<double>::infinity());
  max_priority_ = std::max(max_priority_, priority);
}

double SequenceReplay::probability(std::size_t index) const { return sum_.get(index) / sum_.total(); }

SequenceReplay::Batch SequenceReplay::sample(std::size_t batch_size, double beta, Rng& rng) const {
  if (size_ == 0) throw Error("cannot sample from an empty replay buffer");
  const double total = sum_.total();
  if (!(total > 0.0)) throw Error("every stored priority is zero");
  Batch batch;
  const double n = static_cast<double>(size_);
  const double w_max = std::pow(n * min_.min() / total, -beta);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t i = sum_.find(rng.uniform() * total);
    batch.indices.push_back(i);
    batch.weights.push_back(std::pow(n * sum_.get(i) / total, -beta) / w_max);
  }
  return batch;
}

}  // namespace rqlab
