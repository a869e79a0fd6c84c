#include "explab/core.hpp"

#include <cmath>

#include "explab/replay.hpp"

namespace explab {

bool Box::contains(const std::vector<double>& v) const {
  if (v.size() != low.size()) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= low[i] && v[i] <= high[i])) return false;
  }
  return true;
}

bool ActionSpace::contains(const Action& a) const {
  if (is_discrete()) return a.index >= 0 && a.index < num_discrete;
  return a.index < 0 && bounds.contains(a.values);
}

Action ActionSpace::sample_uniform(Rng& rng) const {
  if (is_discrete()) {
    return Action::discrete(static_cast<int>(rng.uniform_index(num_discrete)));
  }
  std::vector<double> v(bounds.dims());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(bounds.low[i], bounds.high[i]);
  return Action::continuous(std::move(v));
}

void EnvSpec::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument(name + ": gamma must lie in (0, 1)");
  if (step_cap < 1) throw std::invalid_argument(name + ": step cap must be >= 1");
  if (state_bounds.low.size() != state_bounds.high.size()) {
    throw std::invalid_argument(name + ": state bounds dimension mismatch");
  }
  for (std::size_t i = 0; i < state_bounds.dims(); ++i) {
    if (!(state_bounds.high[i] > state_bounds.low[i]) || !std::isfinite(state_bounds.low[i]) ||
        !std::isfinite(state_bounds.high[i])) {
      throw std::invalid_argument(name + ": state bounds must be finite with max > min");
    }
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (any_pushed_ && t.step_index <= last_step_) {
    throw ContractViolation("replay step_index must strictly increase");
  }
  any_pushed_ = true;
  last_step_ = t.step_index;
  if (size_ < capacity_) {
    slots_.push_back(std::move(t));
    ++size_;
    return;
  }
  slots_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  return slots_[(head_ + i) % slots_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(&slots_[rng.uniform_index(size_)]);
  return out;
}

}  // namespace explab
