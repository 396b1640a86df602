#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "apd/cmdp.hpp"
#include "apd/policy.hpp"

namespace apd {

using Vec2 = Eigen::Vector2d;

struct PointEnvConfig {
  Vec2 goal{10.0, 0.0};
  double y_lim = 1.0;
  double v_lim = 1.0;
  double circle_radius = 1.0;
  double x_lim = 0.7;
  double dt = 0.1;
  double action_scale = 1.0;
  double noise_std = 0.0;
  double gamma = 0.99;

  void validate() const;
};

struct RewardCost {
  double reward = 0.0;
  double cost = 0.0;
};

/// Run task: progress towards the goal, penalized for leaving |p_y| <= y_lim
/// and for exceeding the speed limit.
RewardCost run_reward_cost(const Vec2& p_prev, const Vec2& p, const Vec2& v,
                           const PointEnvConfig& cfg);

/// Circle task: angular progress weighted by closeness to the circle of
/// radius o, penalized for leaving |p_x| <= x_lim.
RewardCost circle_reward_cost(const Vec2& p, const Vec2& v,
                              const PointEnvConfig& cfg);

enum class PointTask { Run, Circle };

/// Point mass under double-integrator dynamics. State (p_x, p_y, v_x, v_y),
/// action in R^2 clipped to [-1, 1] per component:
///   v' = v + action_scale * dt * a + noise,  p' = p + dt * v'.
Cmdp make_point_env(PointTask task, const PointEnvConfig& cfg);

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct GridworldSpec {
  int width = 5;
  int height = 5;
  std::vector<Cell> hazard_cells;
  Cell goal_cell{4, 4};
  Cell start_cell{0, 0};
  double step_reward = 0.0;
  double goal_reward = 1.0;
  double hazard_cost = 1.0;
  double slip_prob = 0.0;
  double gamma = 0.99;

  void validate() const;
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.x);
  }
};

/// Gridworld actions, in index order.
enum GridAction : std::size_t { Up = 0, Right = 1, Down = 2, Left = 3 };

/// Tabular CMDP on a grid. Moves that would leave the grid keep the agent in
/// place; with probability slip_prob the move is replaced by one of the three
/// other directions chosen uniformly. Every step from a non-goal cell earns
/// step_reward, entering the goal additionally earns goal_reward, and every
/// step ending in a hazard cell costs hazard_cost. The goal is absorbing with
/// zero reward and cost.
Cmdp make_gridworld(const GridworldSpec& spec);

/// Exact values of a tabular policy.
struct TabularValues {
  Vector v_reward;          // per state
  Eigen::MatrixXd v_costs;  // states x m
  double j_reward = 0.0;    // under the initial distribution
  Vector j_costs;
};

/// Dynamic-programming policy evaluation. horizon == 0 solves the
/// infinite-horizon Bellman system; otherwise evaluates the horizon-truncated
/// sums that sample_trajectory estimates.
TabularValues evaluate_tabular_policy(const Cmdp& cmdp,
                                      const PolicyParams& params,
                                      std::size_t horizon = 0);

}  // namespace apd
