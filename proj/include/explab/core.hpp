#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "explab/rng.hpp"

namespace explab {

/// States are real vectors. Grid-worlds store integer cell coordinates
/// (x, y) exactly; continuous environments store their observation.
using State = std::vector<double>;

/// Either a discrete index or a continuous vector, never both.
struct Action {
  int index = -1;
  std::vector<double> values;

  static Action discrete(int i) { return Action{i, {}}; }
  static Action continuous(std::vector<double> v) { return Action{-1, std::move(v)}; }

  bool is_discrete() const { return index >= 0; }
  bool operator==(const Action&) const = default;
};

/// Axis-aligned bounds, one [low, high] pair per dimension.
struct Box {
  std::vector<double> low;
  std::vector<double> high;

  std::size_t dims() const { return low.size(); }
  bool contains(const std::vector<double>& v) const;
};

struct ActionSpace {
  int num_discrete = 0;  // > 0 for discrete spaces
  Box bounds;            // used when continuous

  bool is_discrete() const { return num_discrete > 0; }
  std::size_t dims() const { return is_discrete() ? 1 : bounds.dims(); }
  bool contains(const Action& a) const;
  Action sample_uniform(Rng& rng) const;
};

struct EnvSpec {
  std::string name;
  Box state_bounds;
  ActionSpace actions;
  int step_cap = 1;
  double gamma = 0.99;
  /// Number of distinct states for finite environments, 0 otherwise.
  std::int64_t num_states = 0;
  /// Per-dimension count of integer levels low..high; empty when states are
  /// continuous.
  std::vector<int> state_levels;

  void validate() const;
};

/// One environment step record.
///
/// `done` marks a true terminal state: Bellman targets use zero continuation
/// there. Episodes that end only because the step cap was hit are stored with
/// done = false since the cap is not part of the state.
struct Transition {
  State s;
  Action a;
  State s_next;
  double r = 0.0;
  bool done = false;
  std::uint64_t step_index = 0;
};

struct StepResult {
  State state;
  double reward = 0.0;
  bool terminal = false;   // goal reached
  bool truncated = false;  // step cap reached

  bool done() const { return terminal || truncated; }
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual State reset(Rng& rng) = 0;
  /// Throws ContractViolation when called on a finished episode.
  virtual StepResult step(const Action& a) = 0;

  /// Dense index in [0, spec().num_states) for finite environments.
  virtual std::optional<std::int64_t> state_index(const State&) const { return std::nullopt; }
  /// Coverage bin of a state and the number of bins.
  virtual std::int64_t coverage_cell(const State& s) const = 0;
  virtual std::int64_t coverage_cells() const = 0;
  /// Largest per-step task reward the environment can emit.
  virtual double max_reward() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

/// Rollout a fixed policy for one episode; returns the undiscounted return.
template <class PolicyFn>
double rollout(Environment& env, Rng& env_rng, PolicyFn&& policy,
               std::vector<Transition>* out = nullptr) {
  State s = env.reset(env_rng);
  double total = 0.0;
  std::uint64_t t = 0;
  for (;;) {
    Action a = policy(s);
    StepResult step = env.step(a);
    total += step.reward;
    if (out) out->push_back({s, a, step.state, step.reward, step.terminal, t});
    ++t;
    if (step.done()) break;
    s = std::move(step.state);
  }
  return total;
}

}  // namespace explab
