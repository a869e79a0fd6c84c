#include "explab/qfunction.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "explab/policy.hpp"

namespace explab {

double QFunction::value(const State& s, const Action& a, Net net) const {
  const SaPair row{&s, &a};
  double out = 0.0;
  evaluate(std::span(&row, 1), net, std::span(&out, 1));
  return out;
}

// --------------------------------------------------------------- tabular

TabularQ::TabularQ(const Environment& env, double initial_value)
    : env_(env.clone()), num_actions_(env.spec().actions.num_discrete) {
  if (env.spec().num_states < 1 || !env.spec().actions.is_discrete()) {
    throw std::invalid_argument("tabular Q needs finite states and discrete actions");
  }
  online_.assign(std::size_t(env.spec().num_states * num_actions_), initial_value);
  target_ = online_;
}

std::size_t TabularQ::index(std::int64_t state, int action) const {
  if (action < 0 || action >= num_actions_) throw std::out_of_range("action index out of range");
  return std::size_t(state * num_actions_ + action);
}

std::size_t TabularQ::row(const SaPair& p) const {
  const auto idx = env_->state_index(*p.s);
  if (!idx) throw std::invalid_argument("state has no index");
  return index(*idx, p.a->index);
}

void TabularQ::evaluate(std::span<const SaPair> rows, Net net, std::span<double> out) const {
  const auto& table = net == Net::online ? online_ : target_;
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = table[row(rows[i])];
}

double TabularQ::update(std::span<const SaPair> rows, std::span<const double> targets, double lr) {
  if (rows.size() != targets.size()) throw std::invalid_argument("rows and targets must align");
  double sq = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double& q = online_[row(rows[i])];
    const double err = targets[i] - q;
    sq += err * err;
    q += lr * err;
  }
  return rows.empty() ? 0.0 : sq / double(rows.size());
}

void TabularQ::save(std::ostream& out) const {
  out << "explab-q 1 tabular " << online_.size() / std::size_t(num_actions_) << ' ' << num_actions_
      << '\n';
  out.precision(17);
  for (double v : online_) out << v << '\n';
  for (double v : target_) out << v << '\n';
}

// ----------------------------------------------------------------- MLP

SaEncoder::SaEncoder(Box state_bounds, ActionSpace actions, std::vector<int> levels)
    : state_(std::move(state_bounds)), actions_(std::move(actions)), levels_(std::move(levels)) {
  if (!levels_.empty() && levels_.size() != state_.dims()) {
    throw std::invalid_argument("state levels must match the state dimension");
  }
  int state_width = int(state_.dims());
  if (!levels_.empty()) state_width = std::accumulate(levels_.begin(), levels_.end(), 0);
  width_ = state_width + (actions_.is_discrete() ? actions_.num_discrete : int(actions_.bounds.dims()));
}

void SaEncoder::encode(const State& s, const Action& a, float* out) const {
  if (s.size() != state_.dims()) throw std::invalid_argument("state dimension mismatch");
  if (!levels_.empty()) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const long k = std::lround(s[j] - state_.low[j]);
      if (k < 0 || k >= levels_[j]) throw std::invalid_argument("state outside its levels");
      for (int i = 0; i < levels_[j]; ++i) *out++ = i == k ? 1.0f : 0.0f;
    }
  } else {
    for (std::size_t j = 0; j < s.size(); ++j) {
      *out++ = float(2.0 * (s[j] - state_.low[j]) / (state_.high[j] - state_.low[j]) - 1.0);
    }
  }
  if (actions_.is_discrete()) {
    for (int i = 0; i < actions_.num_discrete; ++i) *out++ = i == a.index ? 1.0f : 0.0f;
    return;
  }
  if (a.values.size() != actions_.bounds.dims()) throw std::invalid_argument("action dimension mismatch");
  const auto& b = actions_.bounds;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    *out++ = float(2.0 * (a.values[j] - b.low[j]) / (b.high[j] - b.low[j]) - 1.0);
  }
}

MlpQ::MlpQ(const EnvSpec& spec, Options options)
    : encoder_(spec.state_bounds, spec.actions,
               options.one_hot_states ? spec.state_levels : std::vector<int>{}),
      online_([&] {
        Rng rng(options.seed);
        return Mlp::initialized(MlpShape{encoder_.width(), options.hidden1, options.hidden2}, rng,
                                options.output_init);
      }()),
      target_(online_),
      adam_(online_.params().size()) {}

Mlp::Matrix MlpQ::encode(std::span<const SaPair> rows) const {
  Mlp::Matrix x(encoder_.width(), Eigen::Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    encoder_.encode(*rows[i].s, *rows[i].a, x.col(Eigen::Index(i)).data());
  }
  return x;
}

void MlpQ::evaluate(std::span<const SaPair> rows, Net net, std::span<double> out) const {
  if (rows.empty()) return;
  const auto y = (net == Net::online ? online_ : target_).forward(encode(rows));
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = double(y(Eigen::Index(i)));
}

double MlpQ::update(std::span<const SaPair> rows, std::span<const double> targets, double lr) {
  if (rows.size() != targets.size()) throw std::invalid_argument("rows and targets must align");
  if (rows.empty()) return 0.0;
  std::vector<float> t(targets.begin(), targets.end());
  Mlp::Vector grad;
  const float loss = online_.loss_and_gradient(encode(rows), t, grad);
  adam_step(online_, adam_, grad, lr);
  return double(loss);
}

void MlpQ::save(std::ostream& out) const {
  out << "explab-q 1 mlp\n";
  online_.save(out);
  target_.save(out);
}

std::unique_ptr<QFunction> load_qfunction(std::istream& in, const Environment& env) {
  std::string magic, kind;
  int version = 0;
  if (!(in >> magic >> version >> kind) || magic != "explab-q" || version != 1) {
    throw std::runtime_error("not a Q snapshot");
  }
  if (kind == "tabular") {
    std::size_t states = 0;
    int actions = 0;
    in >> states >> actions;
    auto q = std::make_unique<TabularQ>(env);
    if (states != std::size_t(env.spec().num_states) || actions != env.spec().actions.num_discrete) {
      throw std::runtime_error("tabular Q snapshot does not match the environment");
    }
    for (Net net : {Net::online, Net::target}) {
      for (double& v : q->table(net)) {
        if (!(in >> v)) throw std::runtime_error("truncated Q snapshot");
      }
    }
    return q;
  }
  if (kind == "mlp") {
    Mlp online = Mlp::load(in);
    Mlp target = Mlp::load(in);
    MlpQ::Options opts;
    opts.hidden1 = online.shape().hidden1;
    opts.hidden2 = online.shape().hidden2;
    auto q = std::make_unique<MlpQ>(env.spec(), opts);
    if (q->network(Net::online).shape().input != online.shape().input) {
      opts.one_hot_states = !opts.one_hot_states;
      q = std::make_unique<MlpQ>(env.spec(), opts);
    }
    if (!(q->network(Net::online).shape() == online.shape()) || !(target.shape() == online.shape())) {
      throw std::runtime_error("mlp Q snapshot does not match the environment");
    }
    q->network(Net::online) = std::move(online);
    q->network(Net::target) = std::move(target);
    return q;
  }
  throw std::runtime_error("unknown Q snapshot kind '" + kind + "'");
}

// ------------------------------------------------------------- optimism

double optimism_weight(double count, double c) {
  if (c <= 0.0) return 1.0;
  const double n = std::max(count, 0.0);
  return std::sqrt(n) / std::sqrt(n + c);
}

double optimistic_value(double q, double count, double c, double r_bar) {
  const double w = optimism_weight(count, c);
  return w * q + (1.0 - w) * r_bar;
}

double optimistic_q(const QFunction& q, const Optimism& opt, const State& s, const Action& a, Net net) {
  const double n = opt.counts ? opt.counts->count(s, a) : 0.0;
  return optimistic_value(q.value(s, a, net), n, opt.c, opt.r_bar);
}

// --------------------------------------------------------- soft targets

std::vector<double> soft_next_values(const QFunction& q, const ActionSpace& space,
                                     std::span<const Transition* const> batch,
                                     const SoftTargetConfig& cfg, Rng& rng) {
  if (cfg.tau < 0.0) throw std::invalid_argument("target temperature must be >= 0");
  const bool enumerate = space.is_discrete() && cfg.enumerate_discrete;
  const std::size_t per = enumerate ? std::size_t(space.num_discrete) : std::size_t(cfg.proposals);
  if (per < 1) throw std::invalid_argument("soft targets need at least one proposal");

  // Candidate actions per transition. Terminal transitions need none.
  std::vector<Action> actions;
  std::vector<SaPair> rows;
  std::vector<std::size_t> owner;
  actions.reserve(batch.size() * per);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (batch[j]->done) continue;
    for (std::size_t i = 0; i < per; ++i) {
      actions.push_back(enumerate ? Action::discrete(int(i)) : space.sample_uniform(rng));
    }
    owner.push_back(j);
  }
  rows.reserve(actions.size());
  for (std::size_t g = 0; g < owner.size(); ++g) {
    for (std::size_t i = 0; i < per; ++i) rows.push_back({&batch[owner[g]]->s_next, &actions[g * per + i]});
  }

  std::vector<double> online(rows.size()), target(rows.size());
  q.evaluate(rows, Net::online, online);
  q.evaluate(rows, Net::target, target);

  if (cfg.optimism) {
    const Optimism& opt = *cfg.optimism;
    std::vector<double> counts(per, 0.0);
    for (std::size_t g = 0; g < owner.size(); ++g) {
      const auto group = std::span(actions).subspan(g * per, per);
      if (opt.counts) opt.counts->count_many(batch[owner[g]]->s_next, group, counts);
      for (std::size_t i = 0; i < per; ++i) {
        const std::size_t r = g * per + i;
        online[r] = optimistic_value(online[r], counts[i], opt.c, opt.r_bar);
        target[r] = optimistic_value(target[r], counts[i], opt.c, opt.r_bar);
      }
    }
  }

  std::vector<double> next(batch.size(), 0.0);
  std::vector<double> w(per);
  for (std::size_t g = 0; g < owner.size(); ++g) {
    const auto logits = std::span(online).subspan(g * per, per);
    softmax_weights(logits, cfg.tau, w);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      num += w[i] * target[g * per + i];
      den += w[i];
    }
    next[owner[g]] = num / den;
  }
  return next;
}

std::vector<double> bellman_targets(const QFunction& q, const ActionSpace& space,
                                    std::span<const Transition* const> batch,
                                    const RewardSpec& reward, const SoftTargetConfig& cfg,
                                    Rng& rng) {
  const auto next = soft_next_values(q, space, batch, cfg, rng);
  std::vector<double> y(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Transition& t = *batch[j];
    double r = reward.task_reward ? t.r : 0.0;
    if (reward.bonus_scale != 0.0 && reward.counts) {
      r += reward.bonus_scale * reward.counts->bonus(t.s, t.a);
    }
    const double v = r + (t.done ? 0.0 : cfg.gamma * next[j]);
    y[j] = std::clamp(v, reward.clip_min, reward.clip_max);
  }
  return y;
}

std::vector<double> soft_double_targets(const QFunction& q, const ActionSpace& space,
                                        const Optimism& opt,
                                        std::span<const Transition* const> batch,
                                        const SoftTargetConfig& cfg, Rng& rng) {
  SoftTargetConfig with_opt = cfg;
  with_opt.optimism = &opt;
  RewardSpec reward;
  reward.bonus_scale = 1.0;
  reward.counts = opt.counts;
  reward.clip_min = 0.0;
  reward.clip_max = opt.r_bar;
  return bellman_targets(q, space, batch, reward, with_opt, rng);
}

double soft_double_target(const QFunction& q, const ActionSpace& space, const Optimism& opt,
                          const Transition& tr, const SoftTargetConfig& cfg, Rng& rng) {
  const Transition* one = &tr;
  return soft_double_targets(q, space, opt, std::span(&one, 1), cfg, rng)[0];
}

std::vector<double> ddqn_task_targets(const QFunction& q, const ActionSpace& space,
                                      std::span<const Transition* const> batch,
                                      const SoftTargetConfig& cfg, Rng& rng) {
  SoftTargetConfig plain = cfg;
  plain.optimism = nullptr;
  RewardSpec reward;
  reward.task_reward = true;
  return bellman_targets(q, space, batch, reward, plain, rng);
}

double ddqn_task_target(const QFunction& q, const ActionSpace& space, const Transition& tr,
                        const SoftTargetConfig& cfg, Rng& rng) {
  const Transition* one = &tr;
  return ddqn_task_targets(q, space, std::span(&one, 1), cfg, rng)[0];
}

}  // namespace explab
