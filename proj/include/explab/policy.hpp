#pragma once

#include <span>
#include <vector>

#include "explab/core.hpp"

namespace explab {

class QFunction;
struct Optimism;

/// Unnormalized softmax weights exp((v_i - max v) / tau). tau = 0 puts unit
/// weight on every maximizer and zero elsewhere.
void softmax_weights(std::span<const double> values, double tau, std::span<double> out);

/// Normalized softmax(values / tau).
std::vector<double> softmax(std::span<const double> values, double tau);

/// Index drawn with probability proportional to non-negative weights.
std::size_t sample_categorical(std::span<const double> weights, Rng& rng);

/// Index of a maximum; ties broken uniformly at random.
std::size_t argmax_random_tie(std::span<const double> values, Rng& rng);

/// A stochastic policy seen through the two operations the product sampler
/// needs: drawing actions and scoring actions up to a state-dependent
/// constant.
class ActionPolicy {
 public:
  virtual ~ActionPolicy() = default;

  /// n draws at state s. Policies approximated by importance sampling
  /// return n resamples from one proposal set.
  virtual std::vector<Action> sample(const State& s, int n, Rng& rng) const = 0;

  /// log pi(a_i | s) up to an additive constant shared by all a_i.
  virtual std::vector<double> log_weights(const State& s, std::span<const Action> actions) const = 0;
};

/// pi(a | s) proportional to exp(Q(s, a) / tau), optionally on the optimistic
/// Q+. Discrete spaces with at most kMaxEnumerated actions are handled
/// exactly; everything else uses `proposals` uniform samples with
/// self-normalized weights.
class BoltzmannPolicy final : public ActionPolicy {
 public:
  static constexpr int kMaxEnumerated = 64;

  /// Throws std::invalid_argument when tau <= 0.
  BoltzmannPolicy(const QFunction& q, ActionSpace space, double tau, int proposals = 64,
                  const Optimism* optimism = nullptr);

  std::vector<Action> sample(const State& s, int n, Rng& rng) const override;
  std::vector<double> log_weights(const State& s, std::span<const Action> actions) const override;

  Action sample_one(const State& s, Rng& rng) const { return sample(s, 1, rng).front(); }

  /// Exact action probabilities (discrete, enumerable spaces only).
  std::vector<double> probabilities(const State& s) const;

  /// Q (or Q+) values for the given actions at s.
  std::vector<double> values(const State& s, std::span<const Action> actions) const;

  bool enumerable() const;
  double tau() const { return tau_; }

 private:
  const QFunction* q_;
  ActionSpace space_;
  double tau_;
  int proposals_;
  const Optimism* optimism_;
};

/// Draw from beta(a | s) proportional to pi_task(a | s) pi_explore(a | s):
///   1. draw k actions from pi_task,
///   2. score each with pi_explore,
///   3. pick one with probability proportional to its pi_explore weight.
/// The pi_task factors cancel because pi_task is the proposal.
Action product_sample(const ActionPolicy& task, const ActionPolicy& explore, const State& s,
                      int k, Rng& rng);

/// Greedy action of Q at s: exact argmax over discrete actions, argmax over
/// `proposals` uniform samples otherwise.
Action greedy_action(const QFunction& q, const ActionSpace& space, const State& s, int proposals,
                     Rng& rng);

}  // namespace explab
