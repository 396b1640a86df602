#include "apd/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apd {

void PointEnvConfig::validate() const {
  if (!(y_lim > 0.0 && v_lim > 0.0 && circle_radius > 0.0 && x_lim > 0.0))
    throw std::invalid_argument("PointEnvConfig: limits must be strictly positive");
  if (!(dt > 0.0 && dt <= 1.0))
    throw std::invalid_argument("PointEnvConfig: dt must lie in (0, 1]");
  if (!(action_scale > 0.0))
    throw std::invalid_argument("PointEnvConfig: action_scale must be positive");
  if (!(noise_std >= 0.0))
    throw std::invalid_argument("PointEnvConfig: noise_std must be nonnegative");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("PointEnvConfig: gamma must lie in (0, 1)");
}

RewardCost run_reward_cost(const Vec2& p_prev, const Vec2& p, const Vec2& v,
                           const PointEnvConfig& cfg) {
  RewardCost rc;
  rc.reward = (p_prev - cfg.goal).norm() - (p - cfg.goal).norm();
  rc.cost = (std::abs(p.y()) > cfg.y_lim ? 1.0 : 0.0) +
            (v.norm() > cfg.v_lim ? 1.0 : 0.0);
  return rc;
}

RewardCost circle_reward_cost(const Vec2& p, const Vec2& v,
                              const PointEnvConfig& cfg) {
  RewardCost rc;
  rc.reward = (-p.y() * v.x() + p.x() * v.y()) /
              (1.0 + std::abs(p.norm() - cfg.circle_radius));
  rc.cost = std::abs(p.x()) > cfg.x_lim ? 1.0 : 0.0;
  return rc;
}

namespace {

const Vector& as_vector(const State& s) { return std::get<Vector>(s); }

}  // namespace

Cmdp make_point_env(PointTask task, const PointEnvConfig& cfg) {
  cfg.validate();
  CmdpDefinition def;
  def.state_kind = SpaceKind::Continuous;
  def.action_kind = SpaceKind::Continuous;
  def.state_size = 4;
  def.action_size = 2;
  def.cost_count = 1;
  def.gamma = cfg.gamma;
  def.cost_bound = task == PointTask::Run ? 2.0 : 1.0;

  def.initial = [](Rng&) -> State { return Vector(Vector::Zero(4)); };
  def.transition = [cfg](const State& s, const Action& a, Rng& rng) -> State {
    const Vector& x = as_vector(s);
    const Vector& u = std::get<Vector>(a);
    Vector next(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double clipped = std::clamp(u[j], -1.0, 1.0);
      double vel = x[2 + j] + cfg.action_scale * cfg.dt * clipped;
      if (cfg.noise_std > 0.0) vel += cfg.noise_std * normal(rng);
      next[2 + j] = vel;
      next[j] = x[j] + cfg.dt * vel;
    }
    return next;
  };
  def.reward = [cfg, task](const State& s, const Action&, const State& n) {
    const Vector& x = as_vector(s);
    const Vector& y = as_vector(n);
    const Vec2 p(y[0], y[1]), v(y[2], y[3]);
    if (task == PointTask::Run)
      return run_reward_cost(Vec2(x[0], x[1]), p, v, cfg).reward;
    return circle_reward_cost(p, v, cfg).reward;
  };
  def.costs = [cfg, task](const State& s, const Action&, const State& n) {
    const Vector& x = as_vector(s);
    const Vector& y = as_vector(n);
    const Vec2 p(y[0], y[1]), v(y[2], y[3]);
    const double c = task == PointTask::Run
                         ? run_reward_cost(Vec2(x[0], x[1]), p, v, cfg).cost
                         : circle_reward_cost(p, v, cfg).cost;
    return Vector(Vector::Constant(1, c));
  };
  return Cmdp(std::move(def));
}

void GridworldSpec::validate() const {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("GridworldSpec: grid must be nonempty");
  auto inside = [&](Cell c) {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  };
  if (!inside(goal_cell))
    throw std::invalid_argument("GridworldSpec: goal outside the grid");
  if (!inside(start_cell))
    throw std::invalid_argument("GridworldSpec: start outside the grid");
  for (const Cell& h : hazard_cells)
    if (!inside(h))
      throw std::invalid_argument("GridworldSpec: hazard outside the grid");
  if (!(slip_prob >= 0.0 && slip_prob < 1.0))
    throw std::invalid_argument("GridworldSpec: slip_prob must lie in [0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("GridworldSpec: gamma must lie in (0, 1)");
}

Cmdp make_gridworld(const GridworldSpec& spec) {
  spec.validate();
  const auto n_states = static_cast<std::size_t>(spec.width * spec.height);
  const std::size_t n_actions = 4;
  const std::size_t goal = spec.index(spec.goal_cell);

  std::vector<bool> hazard(n_states, false);
  for (const Cell& h : spec.hazard_cells) hazard[spec.index(h)] = true;

  auto move = [&](std::size_t s, std::size_t dir) {
    int x = static_cast<int>(s % static_cast<std::size_t>(spec.width));
    int y = static_cast<int>(s / static_cast<std::size_t>(spec.width));
    switch (dir) {
      case Up: ++y; break;
      case Right: ++x; break;
      case Down: --y; break;
      default: --x; break;
    }
    x = std::clamp(x, 0, spec.width - 1);
    y = std::clamp(y, 0, spec.height - 1);
    return spec.index(Cell{x, y});
  };

  TabularModel model;
  model.state_count = n_states;
  model.action_count = n_actions;
  model.transitions.resize(n_states * n_actions);
  model.initial.assign(n_states, 0.0);
  model.initial[spec.index(spec.start_cell)] = 1.0;
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      auto& out = model.transitions[s * n_actions + a];
      if (s == goal) {
        out.push_back({goal, 1.0});
        continue;
      }
      for (std::size_t dir = 0; dir < n_actions; ++dir) {
        const double p = dir == a ? 1.0 - spec.slip_prob : spec.slip_prob / 3.0;
        if (p <= 0.0) continue;
        const std::size_t next = move(s, dir);
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& o) { return o.next == next; });
        if (it == out.end())
          out.push_back({next, p});
        else
          it->prob += p;
      }
    }
  }

  CmdpDefinition def;
  def.state_kind = SpaceKind::Discrete;
  def.action_kind = SpaceKind::Discrete;
  def.state_size = n_states;
  def.action_size = n_actions;
  def.cost_count = 1;
  def.gamma = spec.gamma;
  def.cost_bound = std::max(std::abs(spec.hazard_cost), 1e-12);

  const std::size_t start = spec.index(spec.start_cell);
  def.initial = [start](Rng&) -> State { return start; };
  def.transition = [model](const State& s, const Action& a, Rng& rng) -> State {
    const auto& outs = model.outcomes(std::get<std::size_t>(s), std::get<std::size_t>(a));
    if (outs.size() == 1) return outs.front().next;
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (const auto& o : outs) {
      acc += o.prob;
      if (u < acc) return o.next;
    }
    return outs.back().next;
  };
  def.reward = [spec, goal](const State& s, const Action&, const State& n) {
    const auto from = std::get<std::size_t>(s);
    if (from == goal) return 0.0;
    return spec.step_reward + (std::get<std::size_t>(n) == goal ? spec.goal_reward : 0.0);
  };
  def.costs = [spec, goal, hazard](const State& s, const Action&, const State& n) {
    const auto from = std::get<std::size_t>(s);
    const bool hit = from != goal && hazard[std::get<std::size_t>(n)];
    return Vector(Vector::Constant(1, hit ? spec.hazard_cost : 0.0));
  };
  def.tabular = std::move(model);
  return Cmdp(std::move(def));
}

TabularValues evaluate_tabular_policy(const Cmdp& cmdp,
                                      const PolicyParams& params,
                                      std::size_t horizon) {
  if (!cmdp.tabular())
    throw std::invalid_argument("evaluate_tabular_policy: environment has no tabular model");
  check_compatible(cmdp, params);
  const TabularModel& model = *cmdp.tabular();
  const auto n = static_cast<Eigen::Index>(model.state_count);
  const auto m = static_cast<Eigen::Index>(cmdp.cost_count());
  const double gamma = cmdp.gamma();

  // Policy-averaged transition matrix and one-step expected reward/cost.
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(n, n);
  Vector r_pi = Vector::Zero(n);
  Eigen::MatrixXd c_pi = Eigen::MatrixXd::Zero(n, m);
  for (std::size_t s = 0; s < model.state_count; ++s) {
    const Vector pi = action_probabilities(params, s);
    for (std::size_t a = 0; a < model.action_count; ++a) {
      const double w = pi[static_cast<Eigen::Index>(a)];
      for (const auto& o : model.outcomes(s, a)) {
        const double q = w * o.prob;
        const auto si = static_cast<Eigen::Index>(s);
        p_pi(si, static_cast<Eigen::Index>(o.next)) += q;
        r_pi[si] += q * cmdp.reward(State{s}, Action{a}, State{o.next});
        c_pi.row(si) += q * cmdp.costs(State{s}, Action{a}, State{o.next}).transpose();
      }
    }
  }

  TabularValues out;
  if (horizon == 0) {
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - gamma * p_pi;
    const auto lu = system.partialPivLu();
    out.v_reward = lu.solve(r_pi);
    out.v_costs = lu.solve(c_pi);
  } else {
    out.v_reward = Vector::Zero(n);
    out.v_costs = Eigen::MatrixXd::Zero(n, m);
    for (std::size_t t = 0; t < horizon; ++t) {
      out.v_reward = r_pi + gamma * p_pi * out.v_reward;
      out.v_costs = c_pi + gamma * p_pi * out.v_costs;
    }
  }
  const Vector mu0 = Eigen::Map<const Vector>(model.initial.data(), n);
  out.j_reward = mu0.dot(out.v_reward);
  out.j_costs = out.v_costs.transpose() * mu0;
  return out;
}

}  // namespace apd
