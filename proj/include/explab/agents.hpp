#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "explab/core.hpp"
#include "explab/counts.hpp"
#include "explab/policy.hpp"
#include "explab/qfunction.hpp"
#include "explab/replay.hpp"

namespace explab {

/// Every knob of the four agents. Names match the configuration file keys.
struct AgentConfig {
  double gamma = 0.99;

  double tau_task = 0.1;
  double tau_explore = 0.1;
  /// Softmax temperature inside Bellman targets (0 = hard double-Q max).
  double tau_target_task = 0.1;
  double tau_target_explore = 0.1;

  int behavior_k = 64;  // pi_task draws per product-policy action
  int proposals = 64;   // uniform proposals for continuous softmax / argmax

  double explore_lr = 1e-3;
  /// Step size used instead of explore_lr when the exploration Q is tabular.
  double explore_tabular_lr = 0.5;
  int explore_updates_per_step = 2;
  int explore_batch = 128;
  int explore_target_sync = 1;  // environment steps between syncs

  double task_lr = 1e-4;
  /// Step size used instead of task_lr when the task Q is tabular.
  double task_tabular_lr = 0.5;
  int task_batch = 128;
  int task_target_sync = 50;            // Bellman updates between syncs
  double task_updates_per_step = 1.0;   // per-episode training budget

  double optimism_c = 1.0;
  double bonus_scale = 1.0;
  bool fast_adapt = false;

  int warmstart_episodes = 0;
  double warmstart_epsilon = 0.1;

  /// "tabular", "mlp", or "auto" (tabular when the environment is finite).
  std::string explore_q = "mlp";
  std::string task_q = "mlp";
  /// "auto" = tabular counts on finite environments, kernel otherwise.
  std::string counts = "auto";
  int hidden = 512;
  std::int64_t count_table_size = 32768;
  std::int64_t replay_capacity = 1000000;

  int eval_episodes = 10;
  int eval_every = 1;
  /// Evaluation temperature of the task policy; 0 = greedy.
  double eval_tau = 0.0;

  double r_bar() const { return 1.0 / (1.0 - gamma); }
  bool operator==(const AgentConfig&) const = default;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class AgentKind { uniform, ddqn, bbe, deep };

AgentKind parse_agent_kind(const std::string& name);
std::string to_string(AgentKind kind);

/// Per-episode metrics row. eval_return is NaN on episodes without an
/// evaluation pass.
struct RunRecord {
  int episode = 0;  // 1-based
  std::uint64_t env_steps = 0;
  double eval_return = 0.0;
  double train_return = 0.0;
  std::int64_t coverage = 0;
  double wall_time_s = 0.0;
};

/// Stepwise agent. The runner drives act -> env.step -> observe for every
/// step and end_episode after each episode.
class Agent {
 public:
  virtual ~Agent() = default;

  /// Behavior action. Does not mutate learned state.
  virtual Action act(const State& s, Rng& rng) const = 0;
  /// Stores the transition and performs per-step learning.
  virtual void observe(const Transition& t) = 0;
  /// Per-episode training phase; `steps` is the episode's length.
  virtual void end_episode(int steps) = 0;
  /// Action of the evaluation (task) policy.
  virtual Action eval_action(const State& s, Rng& rng) const = 0;
  /// Inserts demonstration transitions before training begins.
  virtual void warm_start(const std::vector<Transition>& data);

  virtual const ReplayBuffer* replay() const { return nullptr; }
  virtual const VisitCounter* counts() const { return nullptr; }
  virtual const QFunction* task_q() const { return nullptr; }
  virtual const QFunction* explore_q() const { return nullptr; }
};

/// Builds an agent for `env`. Seeds are derived from `seed` per component.
std::unique_ptr<Agent> make_agent(AgentKind kind, const Environment& env, const AgentConfig& cfg,
                                  std::uint64_t seed);

/// Mean undiscounted return of the agent's evaluation policy over fresh
/// episodes on a private copy of `env`. No learning or count updates.
double evaluate(const Agent& agent, const Environment& env, int episodes, Rng& rng);

/// Drives one agent through episodes and produces RunRecords.
class Runner {
 public:
  Runner(AgentKind kind, const Environment& env, const AgentConfig& cfg, std::uint64_t seed);

  /// Runs one training episode, evaluates if scheduled (or `force_eval`),
  /// and returns its record.
  RunRecord run_episode(bool force_eval = false);

  std::vector<RunRecord> run(int episodes,
                             const std::function<void(const RunRecord&)>& on_record = {});

  const Agent& agent() const { return *agent_; }
  const Environment& env() const { return *env_; }
  std::int64_t coverage() const { return coverage_; }
  std::uint64_t env_steps() const { return steps_; }

 private:
  AgentConfig cfg_;
  std::uint64_t seed_;
  std::unique_ptr<Environment> env_;
  std::unique_ptr<Agent> agent_;
  Rng env_rng_;
  Rng agent_rng_;
  std::vector<char> visited_;
  std::int64_t coverage_ = 0;
  std::uint64_t steps_ = 0;
  std::uint64_t next_index_ = 0;
  int episode_ = 0;
};

std::vector<RunRecord> run_uniform(const Environment& env, const AgentConfig& cfg, int episodes,
                                   std::uint64_t seed);
std::vector<RunRecord> run_ddqn(const Environment& env, const AgentConfig& cfg, int episodes,
                                std::uint64_t seed);
std::vector<RunRecord> run_bbe(const Environment& env, const AgentConfig& cfg, int episodes,
                               std::uint64_t seed);
std::vector<RunRecord> run_deep(const Environment& env, const AgentConfig& cfg, int episodes,
                                std::uint64_t seed);

}  // namespace explab
