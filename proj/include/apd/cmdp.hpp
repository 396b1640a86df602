#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace apd {

using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Tabular states/actions are indices, continuous ones are real vectors.
using State = std::variant<std::size_t, Vector>;
using Action = std::variant<std::size_t, Vector>;

class PolicyParams;

/// Exact tabular model, present for environments with finite state/action
/// spaces. Enables dynamic-programming policy evaluation.
struct TabularModel {
  struct Outcome {
    std::size_t next;
    double prob;
  };
  std::size_t state_count = 0;
  std::size_t action_count = 0;
  // transitions[s * action_count + a] lists the reachable next states.
  std::vector<std::vector<Outcome>> transitions;
  std::vector<double> initial;

  const std::vector<Outcome>& outcomes(std::size_t s, std::size_t a) const {
    return transitions[s * action_count + a];
  }
};

enum class SpaceKind { Discrete, Continuous };

/// Everything needed to build a Cmdp. Callables must be pure functions of
/// their arguments (and of the rng stream they are given).
struct CmdpDefinition {
  SpaceKind state_kind = SpaceKind::Discrete;
  SpaceKind action_kind = SpaceKind::Discrete;
  std::size_t state_size = 0;   // count (discrete) or dimension (continuous)
  std::size_t action_size = 0;  // count (discrete) or dimension (continuous)
  std::size_t cost_count = 1;
  double gamma = 0.99;
  double cost_bound = 1.0;
  std::function<State(const State&, const Action&, Rng&)> transition;
  std::function<double(const State&, const Action&, const State&)> reward;
  std::function<Vector(const State&, const Action&, const State&)> costs;
  std::function<State(Rng&)> initial;
  std::optional<TabularModel> tabular;
};

/// Constrained MDP. Immutable after construction and safe to share between
/// threads.
class Cmdp {
 public:
  explicit Cmdp(CmdpDefinition def);

  SpaceKind state_kind() const { return def_.state_kind; }
  SpaceKind action_kind() const { return def_.action_kind; }
  std::size_t state_size() const { return def_.state_size; }
  std::size_t action_size() const { return def_.action_size; }
  std::size_t cost_count() const { return def_.cost_count; }
  double gamma() const { return def_.gamma; }
  double cost_bound() const { return def_.cost_bound; }
  const std::optional<TabularModel>& tabular() const { return def_.tabular; }

  State initial_state(Rng& rng) const { return def_.initial(rng); }
  State step(const State& s, const Action& a, Rng& rng) const {
    return def_.transition(s, a, rng);
  }
  double reward(const State& s, const Action& a, const State& next) const {
    return def_.reward(s, a, next);
  }
  Vector costs(const State& s, const Action& a, const State& next) const;

 private:
  CmdpDefinition def_;
};

struct Step {
  State state;
  Action action;
  double reward = 0.0;
  Vector cost;
};

struct Trajectory {
  std::vector<Step> steps;
  State final_state;

  std::size_t length() const { return steps.size(); }
};

struct DiscountedValue {
  double ret = 0.0;
  Vector costs;
};

struct ObjectiveEstimate {
  double reward = 0.0;
  Vector costs;
  // Per-component standard errors of the sample means.
  double reward_stderr = 0.0;
  Vector costs_stderr;
};

/// Counter-based seed derivation: trajectory i of a batch seeded with `base`
/// uses splitmix64(base + (i + 1) * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Smallest horizon H with gamma^H / (1 - gamma) below `rel_tol`.
std::size_t default_horizon(double gamma, double rel_tol = 1e-3);

Trajectory sample_trajectory(const Cmdp& cmdp, const PolicyParams& params,
                             std::size_t horizon, std::uint64_t seed);

/// Discounted return and cost sums over the steps of `traj`.
DiscountedValue discounted_value(const Trajectory& traj, double gamma);

ObjectiveEstimate estimate_objectives(const Cmdp& cmdp,
                                      const PolicyParams& params,
                                      std::size_t n_traj, std::size_t horizon,
                                      std::uint64_t seed);

/// Samples n_traj trajectories with seeds derive_seed(seed, i).
std::vector<Trajectory> sample_batch(const Cmdp& cmdp,
                                     const PolicyParams& params,
                                     std::size_t n_traj, std::size_t horizon,
                                     std::uint64_t seed);

ObjectiveEstimate summarize_batch(const std::vector<Trajectory>& batch,
                                  double gamma, std::size_t cost_count);

}  // namespace apd
