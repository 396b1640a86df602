#pragma once

#include <cmath>
#include <functional>

#include "apd/cmdp.hpp"
#include "apd/policy.hpp"

namespace apd::test {

// One state, two actions, episode of one step with per-action reward and cost.
inline Cmdp bandit(double r0, double r1, double c0, double c1, double gamma = 0.9) {
  CmdpDefinition def;
  def.state_size = 1;
  def.action_size = 2;
  def.gamma = gamma;
  def.cost_bound = std::max({1.0, std::abs(c0), std::abs(c1)});
  def.transition = [](const State&, const Action&, Rng&) { return State{std::size_t{0}}; };
  def.reward = [=](const State&, const Action& a, const State&) {
    return std::get<std::size_t>(a) == 0 ? r0 : r1;
  };
  def.costs = [=](const State&, const Action& a, const State&) {
    return Vector::Constant(1, std::get<std::size_t>(a) == 0 ? c0 : c1);
  };
  def.initial = [](Rng&) { return State{std::size_t{0}}; };
  TabularModel tm;
  tm.state_count = 1;
  tm.action_count = 2;
  tm.transitions = {{{0, 1.0}}, {{0, 1.0}}};
  tm.initial = {1.0};
  def.tabular = tm;
  return Cmdp(def);
}

// Single state and action; reward 1 and cost `cost` on every step.
inline Cmdp chain(double gamma, double cost = 0.0) {
  CmdpDefinition def;
  def.state_size = 1;
  def.action_size = 1;
  def.gamma = gamma;
  def.cost_bound = std::max(1.0, std::abs(cost));
  def.transition = [](const State&, const Action&, Rng&) { return State{std::size_t{0}}; };
  def.reward = [](const State&, const Action&, const State&) { return 1.0; };
  def.costs = [=](const State&, const Action&, const State&) { return Vector::Constant(1, cost); };
  def.initial = [](Rng&) { return State{std::size_t{0}}; };
  return Cmdp(def);
}

// Exact gradient of pi-weighted per-action values for a one-state softmax.
inline Vector softmax_value_grad(const Vector& theta, const Vector& values) {
  const Vector p = (theta.array() - theta.maxCoeff()).exp().matrix();
  const Vector pi = p / p.sum();
  const double mean = pi.dot(values);
  return (pi.array() * (values.array() - mean)).matrix();
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                 double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace apd::test
