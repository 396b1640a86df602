#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "apd/cmdp.hpp"
#include "apd/policy.hpp"

namespace apd {

/// Cost thresholds d, one per constraint.
struct ConstraintSpec {
  Vector d;

  std::size_t size() const { return static_cast<std::size_t>(d.size()); }
};

/// Lagrange multiplier. Every component is nonnegative.
class Multiplier {
 public:
  explicit Multiplier(Vector lambda);
  static Multiplier zeros(std::size_t m);
  static Multiplier scalar(double lambda);

  const Vector& values() const { return lambda_; }
  std::size_t size() const { return static_cast<std::size_t>(lambda_.size()); }
  double operator[](std::size_t i) const {
    return lambda_[static_cast<Eigen::Index>(i)];
  }
  double sum() const { return lambda_.sum(); }

 private:
  Vector lambda_;
};

/// -J_R + lambda^T (J_C - d)
double lagrangian_value(double j_reward, const Vector& j_costs,
                        const Multiplier& lm, const ConstraintSpec& spec);

/// g = J_C - d
Vector constraint_value(const Vector& j_costs, const ConstraintSpec& spec);

struct SamplingConfig {
  std::size_t n_traj = 16;
  std::size_t horizon = 100;
  std::uint64_t seed = 0;
};

struct GradientEstimate {
  Vector grad;
  Vector grad_stderr;
  ObjectiveEstimate objectives;
};

/// Score-function estimate of grad_theta [-J_R + lambda^T (J_C - d)] on a
/// batch sampled under `params`. Each trajectory contributes its total score
/// times its Lagrangian return minus a leave-one-out mean baseline.
GradientEstimate reinforce_grad(const std::vector<Trajectory>& batch,
                                double gamma, const PolicyParams& params,
                                const Multiplier& lm,
                                const ConstraintSpec& spec);

GradientEstimate reinforce_grad(const Cmdp& cmdp, const PolicyParams& params,
                                const Multiplier& lm,
                                const ConstraintSpec& spec,
                                const SamplingConfig& sampling);

/// Generalized advantage estimates for one trajectory's per-step signal.
/// `values` carries V(s_0), ..., V(s_T) including the bootstrap value.
std::vector<double> gae_advantages(std::span<const double> signal,
                                   std::span<const double> values,
                                   double gamma, double gae_lambda);

/// Reward-signal convenience overload.
std::vector<double> gae_advantages(const Trajectory& traj,
                                   std::span<const double> values,
                                   double gamma, double gae_lambda);

struct PpolConfig {
  double clip_ratio = 0.2;
  double gae_lambda = 0.95;
  std::size_t minibatch = 64;
  std::size_t epochs = 4;

  void validate() const;
};

struct AdvantageSample {
  State state;
  Action action;
  double log_prob_old = 0.0;
  double adv_reward = 0.0;
  Vector adv_cost;
};

struct AdvantageBatch {
  std::vector<AdvantageSample> samples;

  std::size_t size() const { return samples.size(); }
};

/// Batch mean of (1/(1+lambda)) (min(rho A_R, clip(rho, 1-eps, 1+eps) A_R)
/// - lambda rho A_C), rho = pi_theta(a|s) / pi_old(a|s). Scalar constraint
/// only. At rho = 1 this is exactly (l_ppo - lambda A_C) / (1 + lambda).
double ppol_surrogate(const AdvantageBatch& batch, const PolicyParams& params,
                      const Multiplier& lm, const PpolConfig& cfg);

/// Gradient of ppol_surrogate with respect to theta.
Vector ppol_surrogate_grad(const AdvantageBatch& batch,
                           const PolicyParams& params, const Multiplier& lm,
                           const PpolConfig& cfg);

}  // namespace apd
