#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "explab/core.hpp"

namespace explab {

// ---------------------------------------------------------------------------
// Grid-world
// ---------------------------------------------------------------------------

enum class GridVariant { plain, reward_free };

/// Cardinal moves. `up` increases y, `right` increases x.
enum GridMove : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

struct GridWorldSpec {
  int width = 40;
  int height = 40;
  std::array<int, 2> start{0, 0};    // lower left
  std::array<int, 2> goal{39, 39};   // upper right
  double goal_reward = 1.0;
  double step_reward = 0.0;
  int step_cap = 200;
  double gamma = 0.99;
};

/// Deterministic 4-action grid. States are (x, y) cell coordinates; moves
/// into a wall leave the agent in place. The plain variant pays goal_reward
/// and terminates on entering the goal cell; the reward-free variant never
/// pays and never terminates early.
class GridWorld final : public Environment {
 public:
  GridWorld(GridVariant variant, GridWorldSpec spec = {});

  const EnvSpec& spec() const override { return env_spec_; }
  State reset(Rng& rng) override;
  StepResult step(const Action& a) override;
  std::optional<std::int64_t> state_index(const State& s) const override;
  std::int64_t coverage_cell(const State& s) const override;
  std::int64_t coverage_cells() const override;
  double max_reward() const override;
  std::unique_ptr<Environment> clone() const override;

  GridVariant variant() const { return variant_; }
  const GridWorldSpec& grid() const { return grid_; }

  /// Places the agent at an arbitrary cell mid-episode (used by tests).
  void set_position(int x, int y);

  /// Deterministic successor of (x, y) under a move, with wall clamping.
  std::array<int, 2> successor(int x, int y, int move) const;

 private:
  GridVariant variant_;
  GridWorldSpec grid_;
  EnvSpec env_spec_;
  int x_ = 0;
  int y_ = 0;
  int t_ = 0;
  bool finished_ = true;
};

std::unique_ptr<GridWorld> make_gridworld(GridVariant variant);

/// Demonstrations from a noisy shortest-path policy: with probability
/// 1 - epsilon take a move that reduces Manhattan distance to the goal
/// (uniformly among such moves), otherwise a uniform move. Rewards are the
/// plain grid's task rewards.
std::vector<Transition> warmstart_dataset(const GridWorld& env, int episodes, double epsilon,
                                          Rng& rng);

// ---------------------------------------------------------------------------
// Hallway
// ---------------------------------------------------------------------------

enum class HallwayVariant { local_optimum, adversarial };

struct HallwayGoal {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.5;
  double scale = 1.0;
  bool shaped = true;  // shaped goals are non-terminal; sparse goals terminate
};

struct HallwaySpec {
  double length = 10.0;
  double width = 1.0;
  double dt = 0.05;
  int step_cap = 500;
  double gamma = 0.99;
  double start_x = 0.25;
  double start_y = 0.5;
  double start_jitter = 0.05;
  std::vector<HallwayGoal> goals;
};

HallwaySpec hallway_spec(HallwayVariant variant);

/// Velocity-controlled point in a long narrow box. The action is a velocity
/// command in [-1, 1]^2; position integrates as clamp(pos + a*dt, box).
/// The observation is (x, y, vx, vy) mapped to [-1, 1], where v is the last
/// commanded velocity.
class Hallway final : public Environment {
 public:
  explicit Hallway(HallwaySpec spec);

  const EnvSpec& spec() const override { return env_spec_; }
  State reset(Rng& rng) override;
  StepResult step(const Action& a) override;
  std::int64_t coverage_cell(const State& s) const override;
  std::int64_t coverage_cells() const override;
  double max_reward() const override;
  std::unique_ptr<Environment> clone() const override;

  const HallwaySpec& hallway() const { return hall_; }

  /// Reward for standing at (x, y), and whether that touches a sparse goal.
  double reward_at(double x, double y, bool* terminal = nullptr) const;

  /// Physical position encoded in an observation.
  std::array<double, 2> position(const State& obs) const;

  static constexpr int kCoverageBins = 50;

 private:
  State observe() const;

  HallwaySpec hall_;
  EnvSpec env_spec_;
  double x_ = 0.0;
  double y_ = 0.0;
  double vx_ = 0.0;
  double vy_ = 0.0;
  int t_ = 0;
  bool finished_ = true;
};

std::unique_ptr<Hallway> make_hallway(HallwayVariant variant);

/// Best achievable per-episode return when driving straight to the goal at
/// full speed and parking at its center.
double hallway_goal_episode_max(const Hallway& env, const HallwayGoal& goal);

/// Name-based factory used by configuration: "gridworld" with variants
/// {plain, reward_free}, "hallway" with {local_optimum, adversarial}.
std::unique_ptr<Environment> make_environment(const std::string& name, const std::string& variant);

}  // namespace explab
