#include "apd/cmdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "apd/policy.hpp"

namespace apd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Cmdp::Cmdp(CmdpDefinition def) : def_(std::move(def)) {
  if (!(def_.gamma > 0.0 && def_.gamma < 1.0))
    throw std::invalid_argument("Cmdp: gamma must lie in (0, 1)");
  if (!(def_.cost_bound > 0.0))
    throw std::invalid_argument("Cmdp: cost bound must be positive");
  if (def_.cost_count == 0)
    throw std::invalid_argument("Cmdp: at least one cost function required");
  if (!def_.transition || !def_.reward || !def_.costs || !def_.initial)
    throw std::invalid_argument("Cmdp: missing dynamics callable");
}

Vector Cmdp::costs(const State& s, const Action& a, const State& next) const {
  Vector c = def_.costs(s, a, next);
  if (static_cast<std::size_t>(c.size()) != def_.cost_count)
    throw std::logic_error("Cmdp: cost vector has wrong dimension");
  return c;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

std::size_t default_horizon(double gamma, double rel_tol) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("default_horizon: gamma must lie in (0, 1)");
  const double h = std::log(rel_tol * (1.0 - gamma)) / std::log(gamma);
  return static_cast<std::size_t>(std::ceil(std::max(h, 1.0)));
}

Trajectory sample_trajectory(const Cmdp& cmdp, const PolicyParams& params,
                             std::size_t horizon, std::uint64_t seed) {
  if (horizon == 0)
    throw std::invalid_argument("sample_trajectory: horizon must be >= 1");
  check_compatible(cmdp, params);

  Rng rng(seed);
  Trajectory traj;
  traj.steps.reserve(horizon);
  State s = cmdp.initial_state(rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    Action a = policy_act(params, s, rng);
    State next = cmdp.step(s, a, rng);
    const double r = cmdp.reward(s, a, next);
    Vector c = cmdp.costs(s, a, next);
    traj.steps.push_back(Step{std::move(s), std::move(a), r, std::move(c)});
    s = std::move(next);
  }
  traj.final_state = std::move(s);
  return traj;
}

DiscountedValue discounted_value(const Trajectory& traj, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("discounted_value: gamma must lie in (0, 1)");
  DiscountedValue out;
  out.costs = traj.steps.empty() ? Vector() : Vector::Zero(traj.steps[0].cost.size());
  double discount = 1.0;
  for (const Step& st : traj.steps) {
    out.ret += discount * st.reward;
    out.costs += discount * st.cost;
    discount *= gamma;
  }
  return out;
}

std::vector<Trajectory> sample_batch(const Cmdp& cmdp,
                                     const PolicyParams& params,
                                     std::size_t n_traj, std::size_t horizon,
                                     std::uint64_t seed) {
  if (n_traj == 0)
    throw std::invalid_argument("sample_batch: n_traj must be >= 1");
  std::vector<Trajectory> batch;
  batch.reserve(n_traj);
  for (std::size_t i = 0; i < n_traj; ++i)
    batch.push_back(sample_trajectory(cmdp, params, horizon, derive_seed(seed, i)));
  return batch;
}

ObjectiveEstimate summarize_batch(const std::vector<Trajectory>& batch,
                                  double gamma, std::size_t cost_count) {
  if (batch.empty())
    throw std::invalid_argument("summarize_batch: empty batch");
  const double n = static_cast<double>(batch.size());
  const auto m = static_cast<Eigen::Index>(cost_count);

  double sum_r = 0.0, sum_r2 = 0.0;
  Vector sum_c = Vector::Zero(m), sum_c2 = Vector::Zero(m);
  for (const Trajectory& tr : batch) {
    DiscountedValue v = discounted_value(tr, gamma);
    if (v.costs.size() == 0) v.costs = Vector::Zero(m);
    sum_r += v.ret;
    sum_r2 += v.ret * v.ret;
    sum_c += v.costs;
    sum_c2 += v.costs.cwiseProduct(v.costs);
  }

  ObjectiveEstimate est;
  est.reward = sum_r / n;
  est.costs = sum_c / n;
  if (batch.size() > 1) {
    const double var_r = std::max(0.0, (sum_r2 - n * est.reward * est.reward) / (n - 1.0));
    est.reward_stderr = std::sqrt(var_r / n);
    Vector var_c = ((sum_c2 - n * est.costs.cwiseProduct(est.costs)) / (n - 1.0)).cwiseMax(0.0);
    est.costs_stderr = (var_c / n).cwiseSqrt();
  } else {
    est.costs_stderr = Vector::Zero(m);
  }
  return est;
}

ObjectiveEstimate estimate_objectives(const Cmdp& cmdp,
                                      const PolicyParams& params,
                                      std::size_t n_traj, std::size_t horizon,
                                      std::uint64_t seed) {
  return summarize_batch(sample_batch(cmdp, params, n_traj, horizon, seed),
                         cmdp.gamma(), cmdp.cost_count());
}

}  // namespace apd
