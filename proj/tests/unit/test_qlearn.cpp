#include <doctest.h>

#include <cmath>
#include <sstream>

#include "explab/envs.hpp"
#include "explab/qfunction.hpp"
#include "oracles.hpp"

using namespace explab;

namespace {

struct Grid {
  std::unique_ptr<GridWorld> env = make_gridworld(GridVariant::reward_free);
  std::int64_t idx(const State& s) const { return env->state_index(s).value(); }
  std::vector<Action> actions() const {
    return {Action::discrete(0), Action::discrete(1), Action::discrete(2), Action::discrete(3)};
  }
};

Transition step_to(const State& s, const State& s2, double r = 0.0, bool done = false) {
  return Transition{s, Action::discrete(0), s2, r, done, 0};
}

}  // namespace

TEST_CASE("optimism weight and value") {
  CHECK(optimism_weight(0, 1) == 0.0);
  CHECK(optimism_weight(5, 0) == 1.0);
  CHECK(optimistic_value(40, 0, 1, 100) == 100.0);
  CHECK(optimistic_value(40, 1, 1, 100) == doctest::Approx(57.5736).epsilon(1e-5));
  CHECK(std::abs(optimistic_value(40, 1e8, 1, 100) - 40) < 1e-2);
  CHECK(optimistic_value(-3.5, 7, 0, 100) == -3.5);
  // Monotone toward Q as N grows.
  double prev = optimistic_value(10, 0, 2, 100);
  for (double n = 1; n < 1e6; n *= 3) {
    const double v = optimistic_value(10, n, 2, 100);
    CHECK(v < prev);
    CHECK(v > 10);
    prev = v;
  }
}

TEST_CASE("exploration target: zero network and empty counts without optimism gives the bonus") {
  Grid g;
  TabularQ q(*g.env);
  TabularCounter counts(*g.env);
  Optimism opt{0.0, 100.0, &counts};
  SoftTargetConfig cfg;
  Rng rng(1);
  const auto tr = step_to({3, 3}, {3, 4});
  CHECK(soft_double_target(q, g.env->spec().actions, opt, tr, cfg, rng) == 1.0);
  counts.add({3, 3}, Action::discrete(0));
  counts.add({3, 3}, Action::discrete(0));
  counts.add({3, 3}, Action::discrete(0));
  counts.add({3, 3}, Action::discrete(0));
  CHECK(soft_double_target(q, g.env->spec().actions, opt, tr, cfg, rng) == 0.5);
}

TEST_CASE("exploration target is clipped to r_bar") {
  Grid g;
  TabularQ q(*g.env, 150.0);
  TabularCounter counts(*g.env);
  Optimism opt{0.0, 100.0, &counts};
  SoftTargetConfig cfg;
  Rng rng(2);
  CHECK(soft_double_target(q, g.env->spec().actions, opt, step_to({1, 1}, {1, 2}), cfg, rng) == 100.0);
  TabularQ neg(*g.env, -50.0);
  CHECK(soft_double_target(neg, g.env->spec().actions, opt, step_to({1, 1}, {1, 2}), cfg, rng) == 0.0);
}

TEST_CASE("exploration target with optimism: unvisited next state saturates, one visit interpolates") {
  Grid g;
  TabularQ q(*g.env, 40.0);
  TabularCounter counts(*g.env);
  Optimism opt{1.0, 100.0, &counts};
  SoftTargetConfig cfg;
  Rng rng(3);
  const State s{2, 2}, s2{2, 3};
  CHECK(soft_double_target(q, g.env->spec().actions, opt, step_to(s, s2), cfg, rng) == 100.0);
  for (const auto& a : g.actions()) counts.add(s2, a);
  CHECK(soft_double_target(q, g.env->spec().actions, opt, step_to(s, s2), cfg, rng) ==
        doctest::Approx(1.0 + 0.99 * 57.5736).epsilon(1e-5));
}

TEST_CASE("soft next value over 4 actions matches the enumerated expectation") {
  Grid g;
  TabularQ q(*g.env);
  const State s{0, 0}, s2{5, 5};
  const std::vector<double> target_vals{0.3, 1.7, -0.4, 1.2}, online_vals{1.0, 0.2, 0.9, 0.5};
  for (int a = 0; a < 4; ++a) q.at(g.idx(s2), a) = target_vals[std::size_t(a)];
  q.sync_target();
  for (int a = 0; a < 4; ++a) q.at(g.idx(s2), a) = online_vals[std::size_t(a)];
  for (double tau : {0.05, 0.1, 1.0, 10.0}) {
    SoftTargetConfig cfg;
    cfg.tau = tau;
    cfg.gamma = 0.9;
    Rng rng(4);
    const auto w = oracle::softmax(online_vals, tau);
    double expect = 0;
    for (int a = 0; a < 4; ++a) expect += w[std::size_t(a)] * target_vals[std::size_t(a)];
    const auto tr = step_to(s, s2, 0.25);
    CHECK(std::abs(ddqn_task_target(q, g.env->spec().actions, tr, cfg, rng) - (0.25 + 0.9 * expect)) <
          1e-6);
  }
}

TEST_CASE("tiny temperature agrees with the hard double-Q max") {
  Grid g;
  TabularQ q(*g.env);
  Rng fill(5);
  const State s{7, 7}, s2{7, 8};
  for (int a = 0; a < 4; ++a) q.at(g.idx(s2), a) = fill.uniform(-1, 1);
  q.sync_target();
  for (int a = 0; a < 4; ++a) q.at(g.idx(s2), a) = fill.uniform(-1, 1);
  SoftTargetConfig soft, hard;
  soft.tau = 1e-6;
  hard.tau = 0.0;
  Rng rng(6);
  const auto tr = step_to(s, s2);
  CHECK(std::abs(ddqn_task_target(q, g.env->spec().actions, tr, soft, rng) -
                 ddqn_task_target(q, g.env->spec().actions, tr, hard, rng)) < 1e-9);
}

TEST_CASE("task target: terminal transitions have no continuation") {
  Grid g;
  TabularQ q(*g.env, 5.0);
  q.sync_target();
  SoftTargetConfig cfg;
  Rng rng(7);
  CHECK(ddqn_task_target(q, g.env->spec().actions, step_to({1, 1}, {1, 2}, 1.0, true), cfg, rng) == 1.0);
  CHECK(ddqn_task_target(q, g.env->spec().actions, step_to({1, 1}, {1, 2}, 1.0, false), cfg, rng) ==
        doctest::Approx(1.0 + 0.99 * 5.0));
}

TEST_CASE("bellman targets: bonus scale and clipping") {
  Grid g;
  TabularQ q(*g.env);
  TabularCounter counts(*g.env);
  const std::vector<Transition> trs{step_to({1, 1}, {1, 2}, 0.5), step_to({2, 1}, {2, 2}, 0.0)};
  std::vector<const Transition*> batch{&trs[0], &trs[1]};
  RewardSpec r;
  r.task_reward = true;
  r.bonus_scale = 2.0;
  r.counts = &counts;
  r.clip_max = 2.2;
  SoftTargetConfig cfg;
  Rng rng(8);
  const auto y = bellman_targets(q, g.env->spec().actions, batch, r, cfg, rng);
  CHECK(y[0] == 2.2);
  CHECK(y[1] == 2.0);
}

TEST_CASE("tabular update moves toward the target by lr") {
  Grid g;
  TabularQ q(*g.env);
  const State s{4, 4};
  const Action a = Action::discrete(1);
  q.at(g.idx(s), 1) = 2.0;
  const SaPair row{&s, &a};
  const double y = 10.0;
  const double mse = q.update(std::span(&row, 1), std::span(&y, 1), 0.5);
  CHECK(mse == 64.0);
  CHECK(q.value(s, a) == 6.0);
  CHECK(q.value(s, a, Net::target) == 0.0);
  q.sync_target();
  CHECK(q.value(s, a, Net::target) == 6.0);
}

TEST_CASE("grid states are one-hot per coordinate") {
  Grid g;
  const auto& spec = g.env->spec();
  SaEncoder enc(spec.state_bounds, spec.actions, spec.state_levels);
  REQUIRE(enc.width() == 40 + 40 + 4);
  std::vector<float> x(std::size_t(enc.width()), -1.0f);
  enc.encode(State{3, 39}, Action::discrete(2), x.data());
  for (int i = 0; i < enc.width(); ++i) {
    const bool hot = i == 3 || i == 40 + 39 || i == 80 + 2;
    CHECK(x[std::size_t(i)] == (hot ? 1.0f : 0.0f));
  }
  CHECK_THROWS_AS(enc.encode(State{40, 0}, Action::discrete(0), x.data()), std::invalid_argument);
  SaEncoder scaled(spec.state_bounds, spec.actions);
  CHECK(scaled.width() == 2 + 4);
  scaled.encode(State{0, 39}, Action::discrete(0), x.data());
  CHECK(x[0] == -1.0f);
  CHECK(x[1] == 1.0f);
}

TEST_CASE("MLP Q: loss decreases on a fixed batch and sync copies the network") {
  Grid g;
  MlpQ q(g.env->spec(), MlpQ::Options{32, 32, 3e-3, 1});
  Rng rng(9);
  std::vector<State> states;
  std::vector<Action> acts;
  for (int i = 0; i < 32; ++i) {
    states.push_back({double(rng.uniform_index(40)), double(rng.uniform_index(40))});
    acts.push_back(Action::discrete(int(rng.uniform_index(4))));
  }
  std::vector<SaPair> rows;
  std::vector<double> y;
  for (int i = 0; i < 32; ++i) {
    rows.push_back({&states[std::size_t(i)], &acts[std::size_t(i)]});
    y.push_back(rng.uniform(0, 1));
  }
  const double first = q.update(rows, y, 1e-3);
  double last = first;
  for (int k = 0; k < 300; ++k) last = q.update(rows, y, 1e-3);
  CHECK(last < 0.5 * first);
  CHECK(q.value(states[0], acts[0], Net::target) != q.value(states[0], acts[0], Net::online));
  q.sync_target();
  CHECK(q.value(states[0], acts[0], Net::target) == q.value(states[0], acts[0], Net::online));
}

TEST_CASE("Q snapshots round-trip") {
  Grid g;
  Rng rng(10);
  TabularQ t(*g.env);
  for (int i = 0; i < 50; ++i) t.at(std::int64_t(rng.uniform_index(1600)), int(rng.uniform_index(4))) = rng.uniform();
  MlpQ m(g.env->spec(), MlpQ::Options{16, 16, 0.5, 2});
  for (const QFunction* q : {static_cast<const QFunction*>(&t), static_cast<const QFunction*>(&m)}) {
    std::stringstream ss;
    q->save(ss);
    const auto back = load_qfunction(ss, *g.env);
    for (int i = 0; i < 20; ++i) {
      const State s{double(rng.uniform_index(40)), double(rng.uniform_index(40))};
      const Action a = Action::discrete(int(rng.uniform_index(4)));
      CHECK(back->value(s, a) == q->value(s, a));
      CHECK(back->value(s, a, Net::target) == q->value(s, a, Net::target));
    }
  }
}

TEST_CASE("continuous soft targets use proposals and stay within the Q range") {
  auto env = make_hallway(HallwayVariant::local_optimum);
  MlpQ q(env->spec(), MlpQ::Options{16, 16, 0.5, 3});
  SoftTargetConfig cfg;
  cfg.proposals = 32;
  Rng rng(11);
  const Transition tr{{0, 0, 0, 0}, Action::continuous({0.1, 0.1}), {0.1, 0, 0.2, 0.2}, 0.0, false, 0};
  const double v = ddqn_task_target(q, env->spec().actions, tr, cfg, rng) / 0.99;
  double lo = 1e9, hi = -1e9;
  Rng probe(12);
  for (int i = 0; i < 4000; ++i) {
    const double x = q.value(tr.s_next, Action::continuous({probe.uniform(-1, 1), probe.uniform(-1, 1)}),
                             Net::target);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(v >= lo - 1e-9);
  CHECK(v <= hi + 1e-9);
}
