#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "explab/core.hpp"
#include "explab/envs.hpp"
#include "explab/replay.hpp"
#include "explab/rng.hpp"

using namespace explab;

namespace {

Transition tr(std::uint64_t step, double r = 0.0) {
  return Transition{{double(step)}, Action::discrete(0), {double(step + 1)}, r, false, step};
}

}  // namespace

TEST_CASE("rng streams are deterministic and distinct") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(1, "env") == derive_seed(1, "env"));
  CHECK(derive_seed(1, "env") != derive_seed(1, "agent"));
  CHECK(derive_seed(1, "eval", 3) != derive_seed(1, "eval", 4));
  CHECK(derive_seed(1, "env") != derive_seed(2, "env"));
}

TEST_CASE("rng uniform draws stay in range and serialize round-trips") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(r.uniform_index(7) < 7u);
  }
  r.normal();  // leaves a cached spare
  Rng copy = Rng::deserialize(r.serialize());
  for (int i = 0; i < 50; ++i) CHECK(copy.normal() == r.normal());
}

TEST_CASE("replay sampling from a single transition repeats it") {
  ReplayBuffer buf(10);
  buf.push(tr(0));
  Rng rng(1);
  const auto batch = buf.sample(4, rng);
  REQUIRE(batch.size() == 4);
  for (const auto* t : batch) CHECK(t == &buf[0]);
}

TEST_CASE("replay sampling is uniform over a two-element buffer") {
  ReplayBuffer buf(10);
  buf.push(tr(0));
  buf.push(tr(1));
  Rng rng(2);
  const auto batch = buf.sample(100000, rng);
  double first = 0;
  for (const auto* t : batch) first += t == &buf[0];
  CHECK(std::abs(first / 1e5 - 0.5) < 0.02);
}

TEST_CASE("replay batch of 128 from 10^4 transitions is valid") {
  ReplayBuffer buf(20000);
  for (std::uint64_t i = 0; i < 10000; ++i) buf.push(tr(i));
  Rng rng(3);
  const auto batch = buf.sample(128, rng);
  REQUIRE(batch.size() == 128);
  for (const auto* t : batch) CHECK(t->step_index < 10000u);
}

TEST_CASE("replay evicts FIFO at capacity") {
  ReplayBuffer buf(5);
  for (std::uint64_t i = 0; i < 8; ++i) {
    buf.push(tr(i));
    CHECK(buf.size() <= buf.capacity());
  }
  CHECK(buf.size() == 5);
  std::set<std::uint64_t> kept;
  for (std::size_t i = 0; i < buf.size(); ++i) kept.insert(buf[i].step_index);
  CHECK(kept == std::set<std::uint64_t>{3, 4, 5, 6, 7});
  CHECK(buf[0].step_index == 3);
}

TEST_CASE("replay rejects non-increasing step indices and empty sampling") {
  ReplayBuffer buf(5);
  Rng rng(0);
  CHECK_THROWS_AS(buf.sample(1, rng), std::logic_error);
  buf.push(tr(4));
  CHECK_THROWS_AS(buf.push(tr(4)), ContractViolation);
  CHECK_THROWS_AS(buf.push(tr(2)), ContractViolation);
  CHECK_NOTHROW(buf.push(tr(5)));
}

TEST_CASE("env spec validation") {
  EnvSpec spec;
  spec.state_bounds = Box{{0}, {1}};
  spec.actions.num_discrete = 2;
  spec.gamma = 1.0;
  CHECK_THROWS(spec.validate());
  spec.gamma = 0.99;
  spec.step_cap = 0;
  CHECK_THROWS(spec.validate());
  spec.step_cap = 1;
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("fixed-policy rollouts are bit-identical under the same seed") {
  auto run = [](std::uint64_t seed) {
    auto env = make_hallway(HallwayVariant::local_optimum);
    Rng env_rng(seed), pol(seed + 1);
    std::vector<Transition> out;
    rollout(*env, env_rng, [&](const State&) {
      return Action::continuous({pol.uniform(-1, 1), pol.uniform(-1, 1)});
    }, &out);
    return out;
  };
  const auto a = run(5), b = run(5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].s == b[i].s);
    CHECK(a[i].a == b[i].a);
    CHECK(a[i].r == b[i].r);
  }
}
