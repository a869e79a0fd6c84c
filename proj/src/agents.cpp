#include "explab/agents.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "explab/envs.hpp"

namespace explab {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

}  // namespace

void AgentConfig::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(tau_task > 0.0, "tau_task", "must be > 0");
  require(tau_explore > 0.0, "tau_explore", "must be > 0");
  require(tau_target_task >= 0.0, "tau_target_task", "must be >= 0");
  require(tau_target_explore >= 0.0, "tau_target_explore", "must be >= 0");
  require(behavior_k >= 1, "behavior_k", "must be >= 1");
  require(proposals >= 1, "proposals", "must be >= 1");
  require(explore_lr > 0.0, "explore_lr", "must be > 0");
  require(explore_tabular_lr > 0.0 && explore_tabular_lr <= 1.0, "explore_tabular_lr",
          "must lie in (0, 1]");
  require(explore_updates_per_step >= 0, "explore_updates_per_step", "must be >= 0");
  require(explore_batch >= 1, "explore_batch", "must be >= 1");
  require(explore_target_sync >= 1, "explore_target_sync", "must be >= 1");
  require(task_lr > 0.0, "task_lr", "must be > 0");
  require(task_tabular_lr > 0.0 && task_tabular_lr <= 1.0, "task_tabular_lr",
          "must lie in (0, 1]");
  require(task_batch >= 1, "task_batch", "must be >= 1");
  require(task_target_sync >= 1, "task_target_sync", "must be >= 1");
  require(task_updates_per_step >= 0.0, "task_updates_per_step", "must be >= 0");
  require(optimism_c >= 0.0, "optimism_c", "must be >= 0");
  require(bonus_scale >= 0.0, "bonus_scale", "must be >= 0");
  require(warmstart_episodes >= 0, "warmstart_episodes", "must be >= 0");
  require(warmstart_epsilon >= 0.0 && warmstart_epsilon <= 1.0, "warmstart_epsilon",
          "must lie in [0, 1]");
  require(explore_q == "auto" || explore_q == "tabular" || explore_q == "mlp", "explore_q",
          "must be auto, tabular or mlp");
  require(task_q == "auto" || task_q == "tabular" || task_q == "mlp", "task_q",
          "must be auto, tabular or mlp");
  require(counts == "auto" || counts == "tabular" || counts == "kernel", "counts",
          "must be auto, tabular or kernel");
  require(hidden >= 1, "hidden", "must be >= 1");
  require(count_table_size >= 2, "count_table_size", "must be >= 2");
  require(replay_capacity >= 1, "replay_capacity", "must be >= 1");
  require(eval_episodes >= 1, "eval_episodes", "must be >= 1");
  require(eval_every >= 1, "eval_every", "must be >= 1");
  require(eval_tau >= 0.0, "eval_tau", "must be >= 0");
}

AgentKind parse_agent_kind(const std::string& name) {
  if (name == "uniform") return AgentKind::uniform;
  if (name == "ddqn") return AgentKind::ddqn;
  if (name == "bbe") return AgentKind::bbe;
  if (name == "deep") return AgentKind::deep;
  throw std::invalid_argument("unknown agent '" + name + "'");
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::uniform: return "uniform";
    case AgentKind::ddqn: return "ddqn";
    case AgentKind::bbe: return "bbe";
    case AgentKind::deep: return "deep";
  }
  return "?";
}

void Agent::warm_start(const std::vector<Transition>& data) {
  for (const auto& t : data) observe(t);
}

namespace {

bool finite_discrete(const Environment& env) {
  return env.spec().num_states > 0 && env.spec().actions.is_discrete();
}

std::unique_ptr<QFunction> make_q(const std::string& kind, const Environment& env,
                                  const AgentConfig& cfg, std::uint64_t seed) {
  const bool tabular = kind == "tabular" || (kind == "auto" && finite_discrete(env));
  if (tabular) return std::make_unique<TabularQ>(env);
  MlpQ::Options o;
  o.hidden1 = cfg.hidden;
  o.hidden2 = cfg.hidden;
  o.seed = seed;
  return std::make_unique<MlpQ>(env.spec(), o);
}

std::unique_ptr<VisitCounter> make_counter(const Environment& env, const AgentConfig& cfg,
                                           std::uint64_t seed) {
  const bool tabular = cfg.counts == "tabular" || (cfg.counts == "auto" && finite_discrete(env));
  if (tabular) return std::make_unique<TabularCounter>(env);
  CountTable::Options o;
  o.max_size = std::size_t(cfg.count_table_size);
  o.seed = seed;
  return std::make_unique<KernelCounter>(env.spec(), o);
}

double q_lr(const QFunction& q, double mlp_lr, double tabular_lr) {
  return dynamic_cast<const TabularQ*>(&q) ? tabular_lr : mlp_lr;
}

double update_on(QFunction& q, std::span<const Transition* const> batch,
                 std::span<const double> y, double lr) {
  std::vector<SaPair> rows;
  rows.reserve(batch.size());
  for (const Transition* t : batch) rows.push_back({&t->s, &t->a});
  return q.update(rows, y, lr);
}

/// Evaluation policy over a task Q: greedy (tau = 0) or Boltzmann. On
/// finite discrete environments Q(s, .) is memoized until the Q changes.
class EvalPolicy {
 public:
  EvalPolicy(const Environment& env, const AgentConfig& cfg)
      : env_(env.clone()), space_(env.spec().actions), tau_(cfg.eval_tau),
        proposals_(cfg.proposals) {
    if (finite_discrete(env)) {
      cache_.assign(std::size_t(env.spec().num_states * space_.num_discrete), 0.0);
      valid_.assign(std::size_t(env.spec().num_states), 0);
    }
  }

  void invalidate() { dirty_ = true; }

  Action act(const QFunction& q, const State& s, Rng& rng) const {
    if (cache_.empty()) {
      if (tau_ == 0.0) return greedy_action(q, space_, s, proposals_, rng);
      return BoltzmannPolicy(q, space_, tau_, proposals_).sample_one(s, rng);
    }
    if (dirty_) {
      std::fill(valid_.begin(), valid_.end(), 0);
      dirty_ = false;
    }
    const auto idx = *env_->state_index(s);
    const std::size_t A = std::size_t(space_.num_discrete);
    const std::span<double> v(cache_.data() + std::size_t(idx) * A, A);
    if (!valid_[std::size_t(idx)]) {
      std::vector<Action> actions;
      std::vector<SaPair> rows;
      for (int i = 0; i < space_.num_discrete; ++i) actions.push_back(Action::discrete(i));
      for (const auto& a : actions) rows.push_back({&s, &a});
      q.evaluate(rows, Net::online, v);
      valid_[std::size_t(idx)] = 1;
    }
    if (tau_ == 0.0) return Action::discrete(int(argmax_random_tie(v, rng)));
    std::vector<double> w(A);
    softmax_weights(v, tau_, w);
    return Action::discrete(int(sample_categorical(w, rng)));
  }

 private:
  std::shared_ptr<const Environment> env_;
  ActionSpace space_;
  double tau_;
  int proposals_;
  mutable std::vector<double> cache_;
  mutable std::vector<char> valid_;
  mutable bool dirty_ = true;
};

// ----------------------------------------------------------------- uniform

class UniformAgent final : public Agent {
 public:
  explicit UniformAgent(const Environment& env) : space_(env.spec().actions) {}
  Action act(const State&, Rng& rng) const override { return space_.sample_uniform(rng); }
  void observe(const Transition&) override {}
  void end_episode(int) override {}
  Action eval_action(const State&, Rng& rng) const override { return space_.sample_uniform(rng); }
  void warm_start(const std::vector<Transition>&) override {}

 private:
  ActionSpace space_;
};

// ---------------------------------------------------- shared learner parts

class LearningAgent : public Agent {
 protected:
  LearningAgent(const Environment& env, const AgentConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), space_(env.spec().actions), max_reward_(env.max_reward()),
        replay_(std::size_t(cfg.replay_capacity)), learn_rng_(make_stream(seed, "learn")),
        eval_(env, cfg) {}

  /// One per-episode task training phase on logged rewards.
  void train_task(QFunction& q, int steps) {
    const auto n = std::int64_t(std::llround(double(steps) * cfg_.task_updates_per_step));
    SoftTargetConfig tc{cfg_.gamma, cfg_.tau_target_task, cfg_.proposals, true, nullptr};
    const double lr = q_lr(q, cfg_.task_lr, cfg_.task_tabular_lr);
    for (std::int64_t i = 0; i < n; ++i) {
      const auto batch = replay_.sample(std::size_t(cfg_.task_batch), learn_rng_);
      const auto y = ddqn_task_targets(q, space_, batch, tc, learn_rng_);
      update_on(q, batch, y, lr);
      if (++task_updates_ % cfg_.task_target_sync == 0) q.sync_target();
    }
    if (n > 0) eval_.invalidate();
  }

 public:
  const ReplayBuffer* replay() const override { return &replay_; }

 protected:
  AgentConfig cfg_;
  ActionSpace space_;
  double max_reward_;
  ReplayBuffer replay_;
  Rng learn_rng_;
  EvalPolicy eval_;
  std::int64_t task_updates_ = 0;
  std::int64_t env_steps_ = 0;
};

// ------------------------------------------------------------ BBE / DDQN

/// Single Q trained on task reward plus a scaled count bonus. Slow variant:
/// bonus fixed into the stored reward at insertion, per-episode training on
/// the task schedule. Fast variant: raw rewards stored, bonus recomputed at
/// update time, exploration schedule and optimistic Q+ toward the combined
/// value cap. Bonus scale 0 is plain DDQN.
class BbeAgent final : public LearningAgent {
 public:
  BbeAgent(const Environment& env, const AgentConfig& cfg, std::uint64_t seed, bool use_bonus)
      : LearningAgent(env, cfg, seed),
        fast_(cfg.fast_adapt),
        scale_(use_bonus ? cfg.bonus_scale : 0.0),
        q_(make_q(cfg.task_q, env, cfg,
                  derive_seed(seed, "init", 0))) {
    if (scale_ != 0.0) counter_ = make_counter(env, cfg, derive_seed(seed, "counts"));
    if (fast_ && counter_) {
      optimism_.c = cfg.optimism_c;
      optimism_.r_bar = value_cap();
      optimism_.counts = counter_.get();
    }
  }

  Action act(const State& s, Rng& rng) const override {
    if (fast_) {
      return BoltzmannPolicy(*q_, space_, cfg_.tau_explore, cfg_.proposals, optimism())
          .sample_one(s, rng);
    }
    return BoltzmannPolicy(*q_, space_, cfg_.tau_task, cfg_.proposals).sample_one(s, rng);
  }

  void observe(const Transition& t) override {
    store(t);
    if (!fast_) return;
    ++env_steps_;
    RewardSpec reward;
    reward.task_reward = true;
    reward.bonus_scale = scale_;
    reward.counts = counter_.get();
    reward.clip_min = 0.0;
    reward.clip_max = value_cap();
    SoftTargetConfig tc{cfg_.gamma, cfg_.tau_target_explore, cfg_.proposals, true, optimism()};
    const double lr = q_lr(*q_, cfg_.explore_lr, cfg_.explore_tabular_lr);
    for (int i = 0; i < cfg_.explore_updates_per_step; ++i) {
      const auto batch = replay_.sample(std::size_t(cfg_.explore_batch), learn_rng_);
      const auto y = bellman_targets(*q_, space_, batch, reward, tc, learn_rng_);
      update_on(*q_, batch, y, lr);
    }
    if (env_steps_ % cfg_.explore_target_sync == 0) q_->sync_target();
    eval_.invalidate();
  }

  void end_episode(int steps) override {
    if (!fast_) train_task(*q_, steps);
  }

  void warm_start(const std::vector<Transition>& data) override {
    for (const auto& t : data) store(t);
  }

  Action eval_action(const State& s, Rng& rng) const override { return eval_.act(*q_, s, rng); }

  const VisitCounter* counts() const override { return counter_.get(); }
  const QFunction* task_q() const override { return q_.get(); }

 private:
  void store(const Transition& t) {
    Transition stored = t;
    if (!fast_ && counter_) stored.r = t.r + scale_ * counter_->bonus(t.s, t.a);
    replay_.push(std::move(stored));
    if (counter_) counter_->add(t.s, t.a);
  }

  // Largest discounted return of the combined reward.
  double value_cap() const { return (max_reward_ + scale_) * cfg_.r_bar(); }
  const Optimism* optimism() const { return optimism_.counts ? &optimism_ : nullptr; }

  bool fast_;
  double scale_;
  std::unique_ptr<QFunction> q_;
  std::unique_ptr<VisitCounter> counter_;
  Optimism optimism_;
};

// ------------------------------------------------------------------- DEEP

class DeepAgent final : public LearningAgent {
 public:
  DeepAgent(const Environment& env, const AgentConfig& cfg, std::uint64_t seed)
      : LearningAgent(env, cfg, seed),
        task_(make_q(cfg.task_q, env, cfg, derive_seed(seed, "init", 0))),
        explore_(make_q(cfg.explore_q, env, cfg, derive_seed(seed, "init", 1))),
        counter_(make_counter(env, cfg, derive_seed(seed, "counts"))) {
    optimism_.c = cfg.optimism_c;
    optimism_.r_bar = cfg.r_bar();
    optimism_.counts = counter_.get();
  }

  Action act(const State& s, Rng& rng) const override {
    const BoltzmannPolicy task(*task_, space_, cfg_.tau_task, cfg_.proposals);
    const BoltzmannPolicy explore(*explore_, space_, cfg_.tau_explore, cfg_.proposals, &optimism_);
    return product_sample(task, explore, s, cfg_.behavior_k, rng);
  }

  void observe(const Transition& t) override {
    store(t);
    ++env_steps_;
    SoftTargetConfig tc{cfg_.gamma, cfg_.tau_target_explore, cfg_.proposals, true, &optimism_};
    const double lr = q_lr(*explore_, cfg_.explore_lr, cfg_.explore_tabular_lr);
    for (int i = 0; i < cfg_.explore_updates_per_step; ++i) {
      const auto batch = replay_.sample(std::size_t(cfg_.explore_batch), learn_rng_);
      const auto y = soft_double_targets(*explore_, space_, optimism_, batch, tc, learn_rng_);
      update_on(*explore_, batch, y, lr);
    }
    if (env_steps_ % cfg_.explore_target_sync == 0) explore_->sync_target();
  }

  void end_episode(int steps) override { train_task(*task_, steps); }

  void warm_start(const std::vector<Transition>& data) override {
    for (const auto& t : data) store(t);
  }

  Action eval_action(const State& s, Rng& rng) const override { return eval_.act(*task_, s, rng); }

  const VisitCounter* counts() const override { return counter_.get(); }
  const QFunction* task_q() const override { return task_.get(); }
  const QFunction* explore_q() const override { return explore_.get(); }

 private:
  void store(const Transition& t) {
    replay_.push(t);
    counter_->add(t.s, t.a);
  }

  std::unique_ptr<QFunction> task_;
  std::unique_ptr<QFunction> explore_;
  std::unique_ptr<VisitCounter> counter_;
  Optimism optimism_;
};

}  // namespace

std::unique_ptr<Agent> make_agent(AgentKind kind, const Environment& env, const AgentConfig& cfg,
                                  std::uint64_t seed) {
  cfg.validate();
  switch (kind) {
    case AgentKind::uniform: return std::make_unique<UniformAgent>(env);
    case AgentKind::ddqn: {
      AgentConfig plain = cfg;
      plain.fast_adapt = false;
      return std::make_unique<BbeAgent>(env, plain, seed, false);
    }
    case AgentKind::bbe: return std::make_unique<BbeAgent>(env, cfg, seed, true);
    case AgentKind::deep: return std::make_unique<DeepAgent>(env, cfg, seed);
  }
  throw std::invalid_argument("unknown agent kind");
}

double evaluate(const Agent& agent, const Environment& env, int episodes, Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("evaluate needs at least one episode");
  auto e = env.clone();
  double total = 0.0;
  for (int i = 0; i < episodes; ++i) {
    total += rollout(*e, rng, [&](const State& s) { return agent.eval_action(s, rng); });
  }
  return total / episodes;
}

// ------------------------------------------------------------------ runner

Runner::Runner(AgentKind kind, const Environment& env, const AgentConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      env_(env.clone()),
      agent_(make_agent(kind, env, cfg, seed)),
      env_rng_(make_stream(seed, "env")),
      agent_rng_(make_stream(seed, "agent")),
      visited_(std::size_t(env.coverage_cells()), 0) {
  if (cfg.warmstart_episodes > 0) {
    const auto* grid = dynamic_cast<const GridWorld*>(&env);
    if (!grid) throw std::invalid_argument("warmstart_episodes: only supported on the grid-world");
    Rng w = make_stream(seed, "warmstart");
    const auto data = warmstart_dataset(*grid, cfg.warmstart_episodes, cfg.warmstart_epsilon, w);
    agent_->warm_start(data);
    next_index_ = data.size();
  }
}

RunRecord Runner::run_episode(bool force_eval) {
  const auto start = std::chrono::steady_clock::now();
  const auto mark = [&](const State& s) {
    auto& v = visited_[std::size_t(env_->coverage_cell(s))];
    if (!v) {
      v = 1;
      ++coverage_;
    }
  };

  ++episode_;
  RunRecord rec;
  rec.episode = episode_;
  State s = env_->reset(env_rng_);
  mark(s);
  int steps = 0;
  for (;;) {
    Action a = agent_->act(s, agent_rng_);
    StepResult r = env_->step(a);
    mark(r.state);
    rec.train_return += r.reward;
    ++steps;
    agent_->observe(Transition{s, std::move(a), r.state, r.reward, r.terminal, next_index_++});
    if (r.done()) break;
    s = std::move(r.state);
  }
  steps_ += std::uint64_t(steps);
  agent_->end_episode(steps);

  rec.env_steps = steps_;
  rec.coverage = coverage_;
  if (force_eval || episode_ % cfg_.eval_every == 0) {
    Rng eval_rng = make_stream(seed_, "eval", std::uint64_t(episode_));
    rec.eval_return = evaluate(*agent_, *env_, cfg_.eval_episodes, eval_rng);
  } else {
    rec.eval_return = std::numeric_limits<double>::quiet_NaN();
  }
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<RunRecord> Runner::run(int episodes,
                                   const std::function<void(const RunRecord&)>& on_record) {
  std::vector<RunRecord> out;
  out.reserve(std::size_t(std::max(episodes, 0)));
  for (int i = 0; i < episodes; ++i) {
    out.push_back(run_episode(i + 1 == episodes));
    if (on_record) on_record(out.back());
  }
  return out;
}

std::vector<RunRecord> run_uniform(const Environment& env, const AgentConfig& cfg, int episodes,
                                   std::uint64_t seed) {
  return Runner(AgentKind::uniform, env, cfg, seed).run(episodes);
}

std::vector<RunRecord> run_ddqn(const Environment& env, const AgentConfig& cfg, int episodes,
                                std::uint64_t seed) {
  return Runner(AgentKind::ddqn, env, cfg, seed).run(episodes);
}

std::vector<RunRecord> run_bbe(const Environment& env, const AgentConfig& cfg, int episodes,
                               std::uint64_t seed) {
  return Runner(AgentKind::bbe, env, cfg, seed).run(episodes);
}

std::vector<RunRecord> run_deep(const Environment& env, const AgentConfig& cfg, int episodes,
                                std::uint64_t seed) {
  return Runner(AgentKind::deep, env, cfg, seed).run(episodes);
}

}  // namespace explab
