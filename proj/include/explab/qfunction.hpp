#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "explab/core.hpp"
#include "explab/counts.hpp"
#include "explab/mlp.hpp"

namespace explab {

/// Non-owning (state, action) row for batched Q evaluation.
struct SaPair {
  const State* s;
  const Action* a;
};

enum class Net { online, target };

/// State-action value function with an explicitly synced target copy.
class QFunction {
 public:
  virtual ~QFunction() = default;

  virtual void evaluate(std::span<const SaPair> rows, Net net, std::span<double> out) const = 0;
  double value(const State& s, const Action& a, Net net = Net::online) const;

  /// One optimization step of the online parameters toward `targets`.
  /// Returns the mean squared error before the step.
  virtual double update(std::span<const SaPair> rows, std::span<const double> targets,
                        double lr) = 0;

  /// Hard copy online -> target.
  virtual void sync_target() = 0;

  virtual std::unique_ptr<QFunction> clone() const = 0;
  virtual void save(std::ostream& out) const = 0;
};

/// Dense table over (state index, action index); update is q += lr (y - q)
/// applied row by row.
class TabularQ final : public QFunction {
 public:
  TabularQ(const Environment& env, double initial_value = 0.0);

  void evaluate(std::span<const SaPair> rows, Net net, std::span<double> out) const override;
  double update(std::span<const SaPair> rows, std::span<const double> targets, double lr) override;
  void sync_target() override { target_ = online_; }
  std::unique_ptr<QFunction> clone() const override { return std::make_unique<TabularQ>(*this); }
  void save(std::ostream& out) const override;

  double& at(std::int64_t state, int action) { return online_[index(state, action)]; }
  std::vector<double>& table(Net net) { return net == Net::online ? online_ : target_; }

 private:
  std::size_t index(std::int64_t state, int action) const;
  std::size_t row(const SaPair& p) const;

  std::shared_ptr<const Environment> env_;
  int num_actions_;
  std::vector<double> online_;
  std::vector<double> target_;
};

/// Maps (state, action) to the network input: the state (one-hot per
/// dimension when `levels` is given, else scaled to [-1, 1] by its bounds),
/// then the action (one-hot if discrete, scaled to [-1, 1] if continuous).
class SaEncoder {
 public:
  SaEncoder(Box state_bounds, ActionSpace actions, std::vector<int> levels = {});
  int width() const { return width_; }
  void encode(const State& s, const Action& a, float* out) const;

 private:
  Box state_;
  ActionSpace actions_;
  std::vector<int> levels_;
  int width_;
};

/// MLP-backed Q with Adam on the online copy.
class MlpQ final : public QFunction {
 public:
  struct Options {
    int hidden1 = 512;
    int hidden2 = 512;
    double output_init = 3e-3;
    std::uint64_t seed = 0;
    /// One-hot state input on environments with integer state levels.
    bool one_hot_states = false;
  };

  MlpQ(const EnvSpec& spec, Options options);

  void evaluate(std::span<const SaPair> rows, Net net, std::span<double> out) const override;
  double update(std::span<const SaPair> rows, std::span<const double> targets, double lr) override;
  void sync_target() override { target_ = online_; }
  std::unique_ptr<QFunction> clone() const override { return std::make_unique<MlpQ>(*this); }
  void save(std::ostream& out) const override;

  const Mlp& network(Net net) const { return net == Net::online ? online_ : target_; }
  Mlp& network(Net net) { return net == Net::online ? online_ : target_; }

 private:
  Mlp::Matrix encode(std::span<const SaPair> rows) const;

  SaEncoder encoder_;
  Mlp online_;
  Mlp target_;
  AdamState<float> adam_;
};

/// Reads either snapshot kind written by QFunction::save.
std::unique_ptr<QFunction> load_qfunction(std::istream& in, const Environment& env);

// --------------------------------------------------------------- optimism

/// Count-based interpolation toward the optimistic prior value r_bar:
///   Q+ = w Q + (1 - w) r_bar,  w = sqrt(N) / sqrt(N + c).
/// c = 0 disables the prior (w = 1).
struct Optimism {
  double c = 1.0;
  double r_bar = 100.0;
  const VisitCounter* counts = nullptr;
};

double optimism_weight(double count, double c);
double optimistic_value(double q, double count, double c, double r_bar);

/// Optimistic Q+(s, a) using the configured count source.
double optimistic_q(const QFunction& q, const Optimism& opt, const State& s, const Action& a,
                    Net net = Net::online);

// ---------------------------------------------------------- soft targets

struct SoftTargetConfig {
  double gamma = 0.99;
  /// Softmax temperature for selecting next actions; 0 selects the argmax
  /// set (uniformly weighted), i.e. the hard double-Q target.
  double tau = 0.1;
  /// Uniform proposal count for self-normalized importance sampling.
  int proposals = 64;
  /// Enumerate every discrete action instead of sampling proposals.
  bool enumerate_discrete = true;
  /// Optimism applied to both online selection and target evaluation.
  const Optimism* optimism = nullptr;
};

/// E_{a' ~ softmax(Q_online(s', .) / tau)}[Q_target(s', a')] for each
/// transition's next state. Continuous (or non-enumerated) actions use k
/// uniform proposals with self-normalized weights.
std::vector<double> soft_next_values(const QFunction& q, const ActionSpace& space,
                                     std::span<const Transition* const> batch,
                                     const SoftTargetConfig& cfg, Rng& rng);

/// Reward used inside a Bellman target, evaluated at update time.
struct RewardSpec {
  bool task_reward = false;  // include the logged reward r
  double bonus_scale = 0.0;  // add bonus_scale * bonus(s, a) from `counts`
  const VisitCounter* counts = nullptr;
  double clip_min = -std::numeric_limits<double>::infinity();
  double clip_max = std::numeric_limits<double>::infinity();
};

/// clip(reward + gamma E[Q_target(s', a')], clip_min, clip_max), with zero
/// continuation at terminal transitions.
std::vector<double> bellman_targets(const QFunction& q, const ActionSpace& space,
                                    std::span<const Transition* const> batch,
                                    const RewardSpec& reward, const SoftTargetConfig& cfg,
                                    Rng& rng);

/// Exploration target clip(bonus(s, a) + gamma E[Q+_target(s', a')], 0, r_bar)
/// with the bonus taken from the current counts at call time.
std::vector<double> soft_double_targets(const QFunction& q, const ActionSpace& space,
                                        const Optimism& opt,
                                        std::span<const Transition* const> batch,
                                        const SoftTargetConfig& cfg, Rng& rng);

double soft_double_target(const QFunction& q, const ActionSpace& space, const Optimism& opt,
                          const Transition& tr, const SoftTargetConfig& cfg, Rng& rng);

/// Task target r + gamma E[Q_target(s', a')] using logged rewards; no bonus,
/// no optimism, no clipping.
std::vector<double> ddqn_task_targets(const QFunction& q, const ActionSpace& space,
                                      std::span<const Transition* const> batch,
                                      const SoftTargetConfig& cfg, Rng& rng);

double ddqn_task_target(const QFunction& q, const ActionSpace& space, const Transition& tr,
                        const SoftTargetConfig& cfg, Rng& rng);

}  // namespace explab
