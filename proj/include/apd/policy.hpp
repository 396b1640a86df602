#pragma once

#include <cstddef>
#include <variant>

#include "apd/cmdp.hpp"

namespace apd {

/// Softmax over per-state logits; theta[s * actions + a] is the logit of a in s.
struct TabularSoftmax {
  std::size_t states = 0;
  std::size_t actions = 0;
};

/// Gaussian policy with mean W [x; 1] and a learned per-dimension log std.
/// Layout of theta: W row-major (action_dim x (feature_dim + 1)), then the
/// action_dim log standard deviations.
struct LinearGaussian {
  std::size_t feature_dim = 0;
  std::size_t action_dim = 0;
};

using PolicyDescriptor = std::variant<TabularSoftmax, LinearGaussian>;

std::size_t parameter_count(const PolicyDescriptor& desc);

/// Parameter vector paired with the parameterization it belongs to.
class PolicyParams {
 public:
  PolicyParams(PolicyDescriptor desc, Vector theta);

  /// All-zero logits (uniform policy).
  static PolicyParams uniform_tabular(std::size_t states, std::size_t actions);
  /// Zero weights with every log std set to `log_std`.
  static PolicyParams linear_gaussian(std::size_t feature_dim,
                                     std::size_t action_dim,
                                     double log_std = -0.6931471805599453);

  const PolicyDescriptor& descriptor() const { return desc_; }
  const Vector& theta() const { return theta_; }
  std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }

  PolicyParams with_theta(Vector theta) const;

 private:
  PolicyDescriptor desc_;
  Vector theta_;
};

/// Throws std::invalid_argument unless the policy can act on `cmdp`.
void check_compatible(const Cmdp& cmdp, const PolicyParams& params);

Action policy_act(const PolicyParams& params, const State& state, Rng& rng);
double policy_log_prob(const PolicyParams& params, const State& state,
                       const Action& action);
Vector policy_grad_log_prob(const PolicyParams& params, const State& state,
                            const Action& action);

/// pi(.|s) for a tabular softmax policy.
Vector action_probabilities(const PolicyParams& params, std::size_t state);

/// Accumulates `scale * grad log pi(a|s)` into `out` without allocating a
/// full-size temporary (tabular gradients are sparse).
void accumulate_grad_log_prob(const PolicyParams& params, const State& state,
                              const Action& action, double scale, Vector& out);

}  // namespace apd
