#pragma once

#include <cstddef>
#include <vector>

#include "explab/core.hpp"

namespace explab {

/// Bounded FIFO replay dataset with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Appends; evicts the oldest transition at capacity. step_index must
  /// strictly increase across insertions.
  void push(Transition t);

  /// Uniform i.i.d. draw (with replacement) of `batch` transitions.
  /// Throws std::logic_error on an empty buffer.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }

  /// i-th oldest stored transition.
  const Transition& operator[](std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest element
  std::size_t size_ = 0;
  std::vector<Transition> slots_;
  bool any_pushed_ = false;
  std::uint64_t last_step_ = 0;
};

}  // namespace explab
