#include <doctest.h>

#include <cmath>
#include <sstream>

#include "explab/counts.hpp"
#include "explab/envs.hpp"
#include "oracles.hpp"

using namespace explab;

TEST_CASE("kernel: unit at zero distance, closed form, symmetry") {
  const std::vector<double> x{0.2, 0.7}, y{0.5, 0.1}, s{0.3, 0.4};
  CHECK(kernel(x, x, s) == 1.0);
  const std::vector<double> a{0.0}, b{2.0}, one{1.0};
  CHECK(kernel(a, b, one) == doctest::Approx(0.1353352832366127).epsilon(1e-15));
  CHECK(kernel(x, y, s) == kernel(y, x, s));
}

TEST_CASE("bandwidth: exact anchor, closed form, action dims, monotone in n") {
  CHECK(rule_of_thumb_bandwidth(2, 1) == 0.3);
  const double frozen = 0.14028;  // 0.3 * 0.5^0.1 * 1000^-0.1
  CHECK(std::abs(rule_of_thumb_bandwidth(6, 1000) - oracle::bandwidth_closed_form(6, 1000)) < 1e-12);
  CHECK(std::abs(rule_of_thumb_bandwidth(6, 1000) - frozen) < 1e-5);
  const auto s = bandwidth(3, 2, 50);
  REQUIRE(s.size() == 5);
  CHECK(s[3] == 1.0);
  CHECK(s[4] == 1.0);
  CHECK(s[0] == rule_of_thumb_bandwidth(3, 50));
  for (int d : {2, 6, 24}) {
    for (int n = 1; n < 5000; n = n * 3 / 2 + 1) {
      CHECK(rule_of_thumb_bandwidth(d, n + 1) < rule_of_thumb_bandwidth(d, n));
    }
  }
}

TEST_CASE("bonus: clipped inverse square root") {
  CHECK(exploration_bonus(4) == 0.5);
  CHECK(exploration_bonus(0) == 1.0);
  CHECK(exploration_bonus(0.5) == 1.0);
  CHECK(exploration_bonus(100) == doctest::Approx(0.1));
}

TEST_CASE("normalize maps bounds to 0 and 1 and the midpoint to 0.5") {
  ActionSpace as;
  as.bounds = Box{{-2.0}, {2.0}};
  Normalizer n(Box{{-1.0, 0.0}, {1.0, 10.0}}, as);
  CHECK(n.normalize({-1.0, 0.0}, Action::continuous({-2.0})) == std::vector<double>{0, 0, 0});
  CHECK(n.normalize({1.0, 10.0}, Action::continuous({2.0})) == std::vector<double>{1, 1, 1});
  CHECK(n.normalize({0.0, 5.0}, Action::continuous({0.0})) == std::vector<double>{0.5, 0.5, 0.5});
  CHECK_THROWS_AS(n.normalize({0.0}, Action::continuous({0.0})), std::invalid_argument);
}

TEST_CASE("pseudo-count: empty table, merged copies, brute-force match") {
  CountTable::Options o;
  o.state_dims = 2;
  CountTable t(o);
  const std::vector<double> x{0.3, 0.3};
  CHECK(t.pseudo_count(x) == 0.0);
  for (int i = 0; i < 5; ++i) t.insert(x);
  CHECK(t.size() == 1);
  CHECK(t.weight(0) == 5.0);
  CHECK(t.pseudo_count(x) == doctest::Approx(5.0).epsilon(1e-12));

  CountTable::Options p;
  p.state_dims = 3;
  p.fixed_sigma = {0.2, 0.3, 0.1};
  p.dedup_threshold = 1.0;  // never merge
  CountTable u(p);
  Rng rng(1);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 50; ++i) {
    pts.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    u.insert(pts.back());
  }
  const std::vector<double> w(50, 1.0);
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> q{rng.uniform(), rng.uniform(), rng.uniform()};
    CHECK(std::abs(u.pseudo_count(q) - oracle::weighted_kernel_sum(pts, w, q, p.fixed_sigma)) < 1e-9);
  }
}

TEST_CASE("insert: identical twice merges, distant points append, full table keeps size") {
  CountTable::Options o;
  o.state_dims = 1;
  o.fixed_sigma = {0.01};
  o.max_size = 3;
  CountTable t(o);
  t.insert(std::vector<double>{0.5});
  t.insert(std::vector<double>{0.5});
  CHECK(t.size() == 1);
  CHECK(t.weight(0) == 2.0);
  t.insert(std::vector<double>{0.1});
  CHECK(t.size() == 2);
  CHECK(t.weight(1) == 1.0);
  t.insert(std::vector<double>{0.9});
  CHECK(t.size() == 3);
  const auto out = t.insert(std::vector<double>{0.3});
  CHECK(out.kind == CountTable::InsertKind::evicted_and_appended);
  CHECK(t.size() == 3);
  CHECK(t.total_mass() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("dedup spreads one unit over every entry above the threshold") {
  CountTable::Options o;
  o.state_dims = 1;
  o.fixed_sigma = {1.0};
  o.dedup_threshold = 0.95;
  CountTable t(o);
  // Two entries farther apart than the merge radius of each other would
  // allow only if inserted in this order with an intermediate threshold.
  o.dedup_threshold = 0.999;
  CountTable u(o);
  u.insert(std::vector<double>{0.0});
  u.insert(std::vector<double>{0.05});  // k = 0.99875 < 0.999: appended
  REQUIRE(u.size() == 2);
  const auto out = u.insert(std::vector<double>{0.025});  // k = 0.99969 to both
  CHECK(out.kind == CountTable::InsertKind::merged);
  CHECK(out.merged_into.size() == 2);
  CHECK(u.weight(0) == 1.5);
  CHECK(u.weight(1) == 1.5);
}

TEST_CASE("eviction equivalence: bounded table bonuses track an unbounded one") {
  CountTable::Options big, small;
  big.state_dims = small.state_dims = 2;
  big.max_size = 1 << 15;
  small.max_size = 256;
  small.seed = 3;
  CountTable a(big), b(small);
  Rng rng(4);
  double se = 0.0;
  int n = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> x{std::clamp(0.5 + 0.15 * rng.normal(), 0.0, 1.0),
                                std::clamp(0.5 + 0.15 * rng.normal(), 0.0, 1.0)};
    if (i % 50 == 0) {
      const double ba = exploration_bonus(a.pseudo_count(x)), bb = exploration_bonus(b.pseudo_count(x));
      se += (ba - bb) * (ba - bb) / (ba * ba);
      ++n;
    }
    a.insert(x);
    b.insert(x);
  }
  CHECK(std::sqrt(se / n) < 0.10);
}

TEST_CASE("count table snapshot round-trips") {
  CountTable::Options o;
  o.state_dims = 2;
  o.action_dims = 1;
  o.max_size = 8;
  CountTable t(o);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) t.insert(std::vector<double>{rng.uniform(), rng.uniform(), rng.uniform()});
  std::stringstream ss;
  t.save(ss);
  CountTable back = CountTable::load(ss);
  CHECK(back.size() == t.size());
  CHECK(back.insertions() == t.insertions());
  const std::vector<double> q{0.4, 0.4, 0.5};
  CHECK(back.pseudo_count(q) == t.pseudo_count(q));
  // Eviction streams continue identically.
  const std::vector<double> novel{0.99, 0.01, 0.0};
  CHECK(back.insert(novel).evicted_index == t.insert(novel).evicted_index);
}

TEST_CASE("tabular counts increment by one and reject out-of-range cells") {
  TabularCounts c(4, 2);
  c.increment(3, 1);
  c.increment(3, 1);
  CHECK(c.count(3, 1) == 2);
  CHECK(c.count(0, 0) == 0);
  CHECK(c.total() == 2);
  CHECK_THROWS(c.increment(4, 0));
  CHECK_THROWS(c.count(0, 2));
}

TEST_CASE("grid counter uses exact visit counts") {
  auto env = make_gridworld(GridVariant::plain);
  TabularCounter c(*env);
  const State s{3, 4};
  c.add(s, Action::discrete(2));
  c.add(s, Action::discrete(2));
  CHECK(c.count(s, Action::discrete(2)) == 2.0);
  CHECK(c.count(s, Action::discrete(1)) == 0.0);
  CHECK(c.bonus(s, Action::discrete(2)) == doctest::Approx(std::sqrt(0.5)));
  std::vector<double> many(4);
  const std::vector<Action> acts{Action::discrete(0), Action::discrete(1), Action::discrete(2),
                                 Action::discrete(3)};
  c.count_many(s, acts, many);
  CHECK(many == std::vector<double>{0, 0, 2, 0});
}

TEST_CASE("kernel counter batched counts equal single queries") {
  auto env = make_hallway(HallwayVariant::local_optimum);
  CountTable::Options o;
  o.max_size = 64;
  KernelCounter c(env->spec(), o);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    c.add({rng.uniform(-1, 1), rng.uniform(-1, 1), 0, 0},
          Action::continuous({rng.uniform(-1, 1), rng.uniform(-1, 1)}));
  }
  const State s{0.1, -0.2, 0.3, 0.0};
  std::vector<Action> acts;
  for (int i = 0; i < 8; ++i) acts.push_back(Action::continuous({rng.uniform(-1, 1), rng.uniform(-1, 1)}));
  std::vector<double> many(8);
  c.count_many(s, acts, many);
  for (int i = 0; i < 8; ++i) CHECK(many[std::size_t(i)] == doctest::Approx(c.count(s, acts[std::size_t(i)])).epsilon(1e-12));
}
