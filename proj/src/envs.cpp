#include "explab/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace explab {

// ----------------------------------------------------------------- grid-world

GridWorld::GridWorld(GridVariant variant, GridWorldSpec spec) : variant_(variant), grid_(spec) {
  if (grid_.start == grid_.goal) throw std::invalid_argument("grid start must differ from goal");
  env_spec_.name = variant == GridVariant::plain ? "gridworld/plain" : "gridworld/reward_free";
  env_spec_.state_bounds = Box{{0.0, 0.0}, {double(grid_.width - 1), double(grid_.height - 1)}};
  env_spec_.actions.num_discrete = 4;
  env_spec_.step_cap = grid_.step_cap;
  env_spec_.gamma = grid_.gamma;
  env_spec_.num_states = std::int64_t{grid_.width} * grid_.height;
  env_spec_.state_levels = {grid_.width, grid_.height};
  env_spec_.validate();
}

State GridWorld::reset(Rng&) {
  x_ = grid_.start[0];
  y_ = grid_.start[1];
  t_ = 0;
  finished_ = false;
  return {double(x_), double(y_)};
}

std::array<int, 2> GridWorld::successor(int x, int y, int move) const {
  switch (move) {
    case kUp: y = std::min(y + 1, grid_.height - 1); break;
    case kDown: y = std::max(y - 1, 0); break;
    case kLeft: x = std::max(x - 1, 0); break;
    case kRight: x = std::min(x + 1, grid_.width - 1); break;
    default: throw ContractViolation("grid action out of range");
  }
  return {x, y};
}

StepResult GridWorld::step(const Action& a) {
  if (finished_) throw ContractViolation("step called on a finished episode");
  if (!a.is_discrete()) throw ContractViolation("grid-world expects a discrete action");
  const auto next = successor(x_, y_, a.index);
  x_ = next[0];
  y_ = next[1];
  ++t_;
  StepResult out;
  out.state = {double(x_), double(y_)};
  const bool at_goal = x_ == grid_.goal[0] && y_ == grid_.goal[1];
  if (variant_ == GridVariant::plain) {
    out.reward = at_goal ? grid_.goal_reward : grid_.step_reward;
    out.terminal = at_goal;
  }
  out.truncated = !out.terminal && t_ >= grid_.step_cap;
  finished_ = out.done();
  return out;
}

void GridWorld::set_position(int x, int y) {
  if (x < 0 || y < 0 || x >= grid_.width || y >= grid_.height) {
    throw std::out_of_range("grid position outside extents");
  }
  x_ = x;
  y_ = y;
  finished_ = false;
}

std::optional<std::int64_t> GridWorld::state_index(const State& s) const {
  return std::int64_t(s.at(1)) * grid_.width + std::int64_t(s.at(0));
}

std::int64_t GridWorld::coverage_cell(const State& s) const { return *state_index(s); }

std::int64_t GridWorld::coverage_cells() const { return env_spec_.num_states; }

double GridWorld::max_reward() const {
  return variant_ == GridVariant::plain ? std::max(grid_.goal_reward, grid_.step_reward) : 0.0;
}

std::unique_ptr<Environment> GridWorld::clone() const {
  return std::make_unique<GridWorld>(variant_, grid_);
}

std::unique_ptr<GridWorld> make_gridworld(GridVariant variant) {
  return std::make_unique<GridWorld>(variant);
}

std::vector<Transition> warmstart_dataset(const GridWorld& env, int episodes, double epsilon,
                                          Rng& rng) {
  GridWorld plain(GridVariant::plain, env.grid());
  const auto goal = env.grid().goal;
  std::vector<Transition> data;
  std::uint64_t step = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<Transition> episode;
    rollout(
        plain, rng,
        [&](const State& s) {
          const int x = int(s[0]), y = int(s[1]);
          std::vector<int> toward;
          if (y < goal[1]) toward.push_back(kUp);
          if (y > goal[1]) toward.push_back(kDown);
          if (x > goal[0]) toward.push_back(kLeft);
          if (x < goal[0]) toward.push_back(kRight);
          if (toward.empty() || rng.uniform() < epsilon) {
            return Action::discrete(int(rng.uniform_index(4)));
          }
          return Action::discrete(toward[rng.uniform_index(toward.size())]);
        },
        &episode);
    for (auto& t : episode) {
      t.step_index = step++;
      data.push_back(std::move(t));
    }
  }
  return data;
}

// -------------------------------------------------------------------- hallway

HallwaySpec hallway_spec(HallwayVariant variant) {
  HallwaySpec spec;
  if (variant == HallwayVariant::local_optimum) {
    spec.goals = {HallwayGoal{1.0, 0.5, 0.5, 0.1, true}, HallwayGoal{9.5, 0.5, 0.5, 1.0, true}};
  } else {
    spec.goals = {HallwayGoal{0.6, 0.5, 0.05, 1.0, false}};
  }
  return spec;
}

Hallway::Hallway(HallwaySpec spec) : hall_(std::move(spec)) {
  if (!(hall_.length > hall_.width && hall_.width > 0.0)) {
    throw std::invalid_argument("hallway must be longer than it is wide");
  }
  for (const auto& g : hall_.goals) {
    if (g.x < 0 || g.x > hall_.length || g.y < 0 || g.y > hall_.width) {
      throw std::invalid_argument("hallway goal center outside the box");
    }
    if (!(g.scale > 0.0 && g.scale <= 1.0)) throw std::invalid_argument("goal scale must be in (0, 1]");
    if (!(g.radius > 0.0)) throw std::invalid_argument("goal radius must be positive");
  }
  env_spec_.name = "hallway";
  env_spec_.state_bounds = Box{{-1, -1, -1, -1}, {1, 1, 1, 1}};
  env_spec_.actions.bounds = Box{{-1, -1}, {1, 1}};
  env_spec_.step_cap = hall_.step_cap;
  env_spec_.gamma = hall_.gamma;
  env_spec_.validate();
}

State Hallway::observe() const {
  return {2.0 * x_ / hall_.length - 1.0, 2.0 * y_ / hall_.width - 1.0, vx_, vy_};
}

std::array<double, 2> Hallway::position(const State& obs) const {
  return {(obs.at(0) + 1.0) * 0.5 * hall_.length, (obs.at(1) + 1.0) * 0.5 * hall_.width};
}

State Hallway::reset(Rng& rng) {
  x_ = hall_.start_x + rng.uniform(-hall_.start_jitter, hall_.start_jitter);
  y_ = hall_.start_y + rng.uniform(-hall_.start_jitter, hall_.start_jitter);
  x_ = std::clamp(x_, 0.0, hall_.length);
  y_ = std::clamp(y_, 0.0, hall_.width);
  vx_ = vy_ = 0.0;
  t_ = 0;
  finished_ = false;
  return observe();
}

double Hallway::reward_at(double x, double y, bool* terminal) const {
  double r = 0.0;
  bool hit = false;
  for (const auto& g : hall_.goals) {
    const double d = std::hypot(x - g.x, y - g.y);
    if (g.shaped) {
      r += g.scale * std::max(0.0, 1.0 - d / g.radius);
    } else if (d <= g.radius) {
      r += g.scale;
      hit = true;
    }
  }
  if (terminal) *terminal = hit;
  return r;
}

StepResult Hallway::step(const Action& a) {
  if (finished_) throw ContractViolation("step called on a finished episode");
  if (a.is_discrete() || a.values.size() != 2) throw ContractViolation("hallway expects a 2-d velocity");
  vx_ = std::clamp(a.values[0], -1.0, 1.0);
  vy_ = std::clamp(a.values[1], -1.0, 1.0);
  x_ = std::clamp(x_ + vx_ * hall_.dt, 0.0, hall_.length);
  y_ = std::clamp(y_ + vy_ * hall_.dt, 0.0, hall_.width);
  ++t_;
  StepResult out;
  out.reward = reward_at(x_, y_, &out.terminal);
  out.truncated = !out.terminal && t_ >= hall_.step_cap;
  out.state = observe();
  finished_ = out.done();
  return out;
}

std::int64_t Hallway::coverage_cell(const State& s) const {
  const auto p = position(s);
  const auto bin = [](double v, double extent) {
    return std::clamp(int(v / extent * kCoverageBins), 0, kCoverageBins - 1);
  };
  return std::int64_t(bin(p[1], hall_.width)) * kCoverageBins + bin(p[0], hall_.length);
}

std::int64_t Hallway::coverage_cells() const { return std::int64_t{kCoverageBins} * kCoverageBins; }

double Hallway::max_reward() const {
  double r = 0.0;
  for (const auto& g : hall_.goals) r = std::max(r, g.scale);
  return r;
}

std::unique_ptr<Environment> Hallway::clone() const { return std::make_unique<Hallway>(hall_); }

std::unique_ptr<Hallway> make_hallway(HallwayVariant variant) {
  return std::make_unique<Hallway>(hallway_spec(variant));
}

double hallway_goal_episode_max(const Hallway& env, const HallwayGoal& goal) {
  HallwaySpec spec = env.hallway();
  spec.start_jitter = 0.0;
  spec.goals = {goal};
  Hallway solo(spec);
  Rng rng(0);
  return rollout(solo, rng, [&](const State& obs) {
    const auto p = solo.position(obs);
    return Action::continuous({std::clamp((goal.x - p[0]) / spec.dt, -1.0, 1.0),
                               std::clamp((goal.y - p[1]) / spec.dt, -1.0, 1.0)});
  });
}

std::unique_ptr<Environment> make_environment(const std::string& name, const std::string& variant) {
  if (name == "gridworld") {
    if (variant == "plain") return make_gridworld(GridVariant::plain);
    if (variant == "reward_free") return make_gridworld(GridVariant::reward_free);
    throw std::invalid_argument("unknown gridworld variant '" + variant + "'");
  }
  if (name == "hallway") {
    if (variant == "local_optimum") return make_hallway(HallwayVariant::local_optimum);
    if (variant == "adversarial") return make_hallway(HallwayVariant::adversarial);
    throw std::invalid_argument("unknown hallway variant '" + variant + "'");
  }
  throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace explab
