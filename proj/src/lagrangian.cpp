#include "apd/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apd {

namespace {

void check_dims(const Vector& j_costs, const ConstraintSpec& spec,
                const char* who) {
  if (j_costs.size() != spec.d.size())
    throw std::invalid_argument(std::string(who) +
                                ": cost and threshold dimensions differ");
}

}  // namespace

Multiplier::Multiplier(Vector lambda) : lambda_(std::move(lambda)) {
  for (Eigen::Index i = 0; i < lambda_.size(); ++i)
    if (!(lambda_[i] >= 0.0))
      throw std::invalid_argument("Multiplier: components must be nonnegative");
}

Multiplier Multiplier::zeros(std::size_t m) {
  return Multiplier(Vector::Zero(static_cast<Eigen::Index>(m)));
}

Multiplier Multiplier::scalar(double lambda) {
  return Multiplier(Vector::Constant(1, lambda));
}

double lagrangian_value(double j_reward, const Vector& j_costs,
                        const Multiplier& lm, const ConstraintSpec& spec) {
  check_dims(j_costs, spec, "lagrangian_value");
  if (lm.size() != spec.size())
    throw std::invalid_argument("lagrangian_value: multiplier dimension differs");
  return -j_reward + lm.values().dot(j_costs - spec.d);
}

Vector constraint_value(const Vector& j_costs, const ConstraintSpec& spec) {
  check_dims(j_costs, spec, "constraint_value");
  return j_costs - spec.d;
}

GradientEstimate reinforce_grad(const std::vector<Trajectory>& batch,
                                double gamma, const PolicyParams& params,
                                const Multiplier& lm,
                                const ConstraintSpec& spec) {
  if (batch.empty())
    throw std::invalid_argument("reinforce_grad: batch size must be >= 1");
  if (lm.size() != spec.size())
    throw std::invalid_argument("reinforce_grad: multiplier dimension differs");

  const std::size_t n = batch.size();
  const auto dim = static_cast<Eigen::Index>(params.size());
  std::vector<double> lagr(n);
  std::vector<Vector> scores(n, Vector::Zero(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const DiscountedValue v = discounted_value(batch[i], gamma);
    const Vector costs = v.costs.size() ? v.costs : Vector::Zero(spec.d.size());
    lagr[i] = lagrangian_value(v.ret, costs, lm, spec);
    for (const Step& st : batch[i].steps)
      accumulate_grad_log_prob(params, st.state, st.action, 1.0, scores[i]);
  }

  double total = 0.0;
  for (double l : lagr) total += l;

  Vector sum = Vector::Zero(dim), sum_sq = Vector::Zero(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double baseline = n > 1 ? (total - lagr[i]) / static_cast<double>(n - 1) : 0.0;
    const Vector contrib = scores[i] * (lagr[i] - baseline);
    sum += contrib;
    sum_sq += contrib.cwiseProduct(contrib);
  }

  GradientEstimate est;
  const double nd = static_cast<double>(n);
  est.grad = sum / nd;
  if (n > 1) {
    Vector var = ((sum_sq - nd * est.grad.cwiseProduct(est.grad)) / (nd - 1.0)).cwiseMax(0.0);
    est.grad_stderr = (var / nd).cwiseSqrt();
  } else {
    est.grad_stderr = Vector::Zero(dim);
  }
  est.objectives = summarize_batch(batch, gamma, spec.size());
  return est;
}

GradientEstimate reinforce_grad(const Cmdp& cmdp, const PolicyParams& params,
                                const Multiplier& lm,
                                const ConstraintSpec& spec,
                                const SamplingConfig& sampling) {
  if (spec.size() != cmdp.cost_count())
    throw std::invalid_argument("reinforce_grad: thresholds do not match the cost count");
  const auto batch = sample_batch(cmdp, params, sampling.n_traj,
                                  sampling.horizon, sampling.seed);
  return reinforce_grad(batch, cmdp.gamma(), params, lm, spec);
}

std::vector<double> gae_advantages(std::span<const double> signal,
                                   std::span<const double> values,
                                   double gamma, double gae_lambda) {
  if (values.size() != signal.size() + 1)
    throw std::invalid_argument("gae_advantages: need one value per step plus a bootstrap value");
  std::vector<double> adv(signal.size());
  double running = 0.0;
  for (std::size_t t = signal.size(); t-- > 0;) {
    const double delta = signal[t] + gamma * values[t + 1] - values[t];
    running = delta + gamma * gae_lambda * running;
    adv[t] = running;
  }
  return adv;
}

std::vector<double> gae_advantages(const Trajectory& traj,
                                   std::span<const double> values,
                                   double gamma, double gae_lambda) {
  std::vector<double> rewards;
  rewards.reserve(traj.length());
  for (const Step& st : traj.steps) rewards.push_back(st.reward);
  return gae_advantages(rewards, values, gamma, gae_lambda);
}

void PpolConfig::validate() const {
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0))
    throw std::invalid_argument("PpolConfig: clip_ratio must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
    throw std::invalid_argument("PpolConfig: gae_lambda must lie in [0, 1]");
  if (minibatch == 0 || epochs == 0)
    throw std::invalid_argument("PpolConfig: minibatch and epochs must be >= 1");
}

namespace {

double scalar_multiplier(const Multiplier& lm) {
  if (lm.size() != 1)
    throw std::invalid_argument("ppol_surrogate: a single constraint is required");
  return lm[0];
}

double cost_advantage(const AdvantageSample& s) {
  if (s.adv_cost.size() != 1)
    throw std::invalid_argument("ppol_surrogate: sample needs a scalar cost advantage");
  return s.adv_cost[0];
}

}  // namespace

double ppol_surrogate(const AdvantageBatch& batch, const PolicyParams& params,
                      const Multiplier& lm, const PpolConfig& cfg) {
  cfg.validate();
  const double lambda = scalar_multiplier(lm);
  if (batch.samples.empty()) return 0.0;
  double total = 0.0;
  for (const AdvantageSample& s : batch.samples) {
    const double rho = std::exp(policy_log_prob(params, s.state, s.action) - s.log_prob_old);
    const double clipped = std::clamp(rho, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    const double ppo = std::min(rho * s.adv_reward, clipped * s.adv_reward);
    total += (ppo - lambda * rho * cost_advantage(s)) / (1.0 + lambda);
  }
  return total / static_cast<double>(batch.samples.size());
}

Vector ppol_surrogate_grad(const AdvantageBatch& batch,
                           const PolicyParams& params, const Multiplier& lm,
                           const PpolConfig& cfg) {
  cfg.validate();
  const double lambda = scalar_multiplier(lm);
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(params.size()));
  if (batch.samples.empty()) return grad;
  const double scale = 1.0 / (static_cast<double>(batch.samples.size()) * (1.0 + lambda));
  for (const AdvantageSample& s : batch.samples) {
    const double rho = std::exp(policy_log_prob(params, s.state, s.action) - s.log_prob_old);
    // The unclipped branch carries the gradient unless the clip binds.
    const bool clip_binds = (s.adv_reward > 0.0 && rho > 1.0 + cfg.clip_ratio) ||
                            (s.adv_reward < 0.0 && rho < 1.0 - cfg.clip_ratio);
    const double weight =
        (clip_binds ? 0.0 : s.adv_reward) - lambda * cost_advantage(s);
    if (weight != 0.0)
      accumulate_grad_log_prob(params, s.state, s.action, scale * rho * weight, grad);
  }
  return grad;
}

}  // namespace apd
