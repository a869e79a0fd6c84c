#include "explab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "explab/qfunction.hpp"

namespace explab {

void softmax_weights(std::span<const double> values, double tau, std::span<double> out) {
  if (values.empty()) throw std::invalid_argument("softmax of an empty set");
  if (!(tau >= 0.0)) throw std::invalid_argument("softmax temperature must be non-negative");
  const double top = *std::max_element(values.begin(), values.end());
  if (tau == 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] == top ? 1.0 : 0.0;
    return;
  }
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::exp((values[i] - top) / tau);
}

std::vector<double> softmax(std::span<const double> values, double tau) {
  std::vector<double> p(values.size());
  softmax_weights(values, tau, p);
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
  return p;
}

std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical weights must have positive mass");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Rounding left u at the very top; return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

std::size_t argmax_random_tie(std::span<const double> values, Rng& rng) {
  const double top = *std::max_element(values.begin(), values.end());
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == top) ties.push_back(i);
  }
  return ties[rng.uniform_index(ties.size())];
}

// ---------------------------------------------------------------- Boltzmann

BoltzmannPolicy::BoltzmannPolicy(const QFunction& q, ActionSpace space, double tau, int proposals,
                                 const Optimism* optimism)
    : q_(&q), space_(std::move(space)), tau_(tau), proposals_(proposals), optimism_(optimism) {
  if (!(tau > 0.0)) throw std::invalid_argument("Boltzmann temperature must be positive");
  if (proposals < 1) throw std::invalid_argument("Boltzmann policy needs at least one proposal");
}

bool BoltzmannPolicy::enumerable() const {
  return space_.is_discrete() && space_.num_discrete <= kMaxEnumerated;
}

std::vector<double> BoltzmannPolicy::values(const State& s, std::span<const Action> actions) const {
  std::vector<SaPair> rows;
  rows.reserve(actions.size());
  for (const auto& a : actions) rows.push_back({&s, &a});
  std::vector<double> v(actions.size());
  q_->evaluate(rows, Net::online, v);
  if (optimism_) {
    std::vector<double> n(actions.size(), 0.0);
    if (optimism_->counts) optimism_->counts->count_many(s, actions, n);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = optimistic_value(v[i], n[i], optimism_->c, optimism_->r_bar);
    }
  }
  return v;
}

std::vector<double> BoltzmannPolicy::log_weights(const State& s, std::span<const Action> actions) const {
  auto v = values(s, actions);
  for (double& x : v) x /= tau_;
  return v;
}

std::vector<double> BoltzmannPolicy::probabilities(const State& s) const {
  if (!enumerable()) throw std::logic_error("exact probabilities need an enumerable action space");
  std::vector<Action> all;
  for (int i = 0; i < space_.num_discrete; ++i) all.push_back(Action::discrete(i));
  return softmax(values(s, all), tau_);
}

std::vector<Action> BoltzmannPolicy::sample(const State& s, int n, Rng& rng) const {
  std::vector<Action> candidates;
  std::vector<double> w;
  if (enumerable()) {
    for (int i = 0; i < space_.num_discrete; ++i) candidates.push_back(Action::discrete(i));
  } else {
    for (int i = 0; i < proposals_; ++i) candidates.push_back(space_.sample_uniform(rng));
  }
  w.resize(candidates.size());
  softmax_weights(values(s, candidates), tau_, w);
  std::vector<Action> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) out.push_back(candidates[sample_categorical(w, rng)]);
  return out;
}

// ------------------------------------------------------------------ product

Action product_sample(const ActionPolicy& task, const ActionPolicy& explore, const State& s, int k,
                      Rng& rng) {
  if (k < 1) throw std::invalid_argument("product sampling needs k >= 1");
  std::vector<Action> draws = task.sample(s, k, rng);
  if (k == 1) return std::move(draws.front());
  std::vector<double> logw = explore.log_weights(s, draws);
  std::vector<double> w(logw.size());
  softmax_weights(logw, 1.0, w);
  return std::move(draws[sample_categorical(w, rng)]);
}

Action greedy_action(const QFunction& q, const ActionSpace& space, const State& s, int proposals,
                     Rng& rng) {
  std::vector<Action> candidates;
  if (space.is_discrete()) {
    for (int i = 0; i < space.num_discrete; ++i) candidates.push_back(Action::discrete(i));
  } else {
    for (int i = 0; i < proposals; ++i) candidates.push_back(space.sample_uniform(rng));
  }
  std::vector<SaPair> rows;
  for (const auto& a : candidates) rows.push_back({&s, &a});
  std::vector<double> v(candidates.size());
  q.evaluate(rows, Net::online, v);
  return candidates[argmax_random_tie(v, rng)];
}

}  // namespace explab
