#include "apd/policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace apd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t tabular_state(const TabularSoftmax& d, const State& s) {
  const auto* idx = std::get_if<std::size_t>(&s);
  if (idx == nullptr)
    throw std::invalid_argument("tabular policy needs an integer state");
  if (*idx >= d.states)
    throw std::invalid_argument("tabular policy: state index out of range");
  return *idx;
}

std::size_t tabular_action(const TabularSoftmax& d, const Action& a) {
  const auto* idx = std::get_if<std::size_t>(&a);
  if (idx == nullptr)
    throw std::invalid_argument("tabular policy needs an integer action");
  if (*idx >= d.actions)
    throw std::invalid_argument("tabular policy: action index out of range");
  return *idx;
}

const Vector& gaussian_state(const LinearGaussian& d, const State& s) {
  const auto* x = std::get_if<Vector>(&s);
  if (x == nullptr || static_cast<std::size_t>(x->size()) != d.feature_dim)
    throw std::invalid_argument("gaussian policy: state must be a real vector of feature_dim");
  return *x;
}

const Vector& gaussian_action(const LinearGaussian& d, const Action& a) {
  const auto* u = std::get_if<Vector>(&a);
  if (u == nullptr || static_cast<std::size_t>(u->size()) != d.action_dim)
    throw std::invalid_argument("gaussian policy: action must be a real vector of action_dim");
  return *u;
}

Vector softmax_row(const Vector& theta, std::size_t s, std::size_t actions) {
  Vector logits = theta.segment(static_cast<Eigen::Index>(s * actions),
                                static_cast<Eigen::Index>(actions));
  const double mx = logits.maxCoeff();
  Vector p = (logits.array() - mx).exp();
  return p / p.sum();
}

struct GaussianView {
  Vector mean;
  Vector log_std;
};

GaussianView gaussian_of(const LinearGaussian& d, const Vector& theta,
                         const Vector& x) {
  const auto k = static_cast<Eigen::Index>(d.action_dim);
  const auto f = static_cast<Eigen::Index>(d.feature_dim);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      w(theta.data(), k, f + 1);
  GaussianView g;
  g.mean = w.leftCols(f) * x + w.col(f);
  g.log_std = theta.tail(k);
  return g;
}

}  // namespace

std::size_t parameter_count(const PolicyDescriptor& desc) {
  return std::visit(
      overloaded{
          [](const TabularSoftmax& d) { return d.states * d.actions; },
          [](const LinearGaussian& d) {
            return d.action_dim * (d.feature_dim + 1) + d.action_dim;
          },
      },
      desc);
}

PolicyParams::PolicyParams(PolicyDescriptor desc, Vector theta)
    : desc_(desc), theta_(std::move(theta)) {
  const std::size_t want = parameter_count(desc_);
  if (want == 0)
    throw std::invalid_argument("PolicyParams: empty parameterization");
  if (static_cast<std::size_t>(theta_.size()) != want)
    throw std::invalid_argument("PolicyParams: theta has " +
                                std::to_string(theta_.size()) +
                                " entries, descriptor needs " +
                                std::to_string(want));
}

PolicyParams PolicyParams::uniform_tabular(std::size_t states,
                                           std::size_t actions) {
  TabularSoftmax d{states, actions};
  return PolicyParams(d, Vector::Zero(static_cast<Eigen::Index>(parameter_count(d))));
}

PolicyParams PolicyParams::linear_gaussian(std::size_t feature_dim,
                                           std::size_t action_dim,
                                           double log_std) {
  LinearGaussian d{feature_dim, action_dim};
  Vector theta = Vector::Zero(static_cast<Eigen::Index>(parameter_count(d)));
  theta.tail(static_cast<Eigen::Index>(action_dim)).setConstant(log_std);
  return PolicyParams(d, std::move(theta));
}

PolicyParams PolicyParams::with_theta(Vector theta) const {
  return PolicyParams(desc_, std::move(theta));
}

void check_compatible(const Cmdp& cmdp, const PolicyParams& params) {
  std::visit(
      overloaded{
          [&](const TabularSoftmax& d) {
            if (cmdp.state_kind() != SpaceKind::Discrete ||
                cmdp.action_kind() != SpaceKind::Discrete ||
                cmdp.state_size() != d.states || cmdp.action_size() != d.actions)
              throw std::invalid_argument(
                  "tabular policy does not match the environment's spaces");
          },
          [&](const LinearGaussian& d) {
            if (cmdp.state_kind() != SpaceKind::Continuous ||
                cmdp.action_kind() != SpaceKind::Continuous ||
                cmdp.state_size() != d.feature_dim ||
                cmdp.action_size() != d.action_dim)
              throw std::invalid_argument(
                  "gaussian policy does not match the environment's spaces");
          },
      },
      params.descriptor());
}

Vector action_probabilities(const PolicyParams& params, std::size_t state) {
  const auto* d = std::get_if<TabularSoftmax>(&params.descriptor());
  if (d == nullptr)
    throw std::invalid_argument("action_probabilities: tabular policy required");
  if (state >= d->states)
    throw std::invalid_argument("action_probabilities: state index out of range");
  return softmax_row(params.theta(), state, d->actions);
}

Action policy_act(const PolicyParams& params, const State& state, Rng& rng) {
  return std::visit(
      overloaded{
          [&](const TabularSoftmax& d) -> Action {
            const Vector p = softmax_row(params.theta(), tabular_state(d, state), d.actions);
            const double u = uniform01(rng);
            double acc = 0.0;
            for (std::size_t a = 0; a + 1 < d.actions; ++a) {
              acc += p[static_cast<Eigen::Index>(a)];
              if (u < acc) return a;
            }
            return d.actions - 1;
          },
          [&](const LinearGaussian& d) -> Action {
            const GaussianView g = gaussian_of(d, params.theta(), gaussian_state(d, state));
            std::normal_distribution<double> normal(0.0, 1.0);
            Vector a(g.mean.size());
            for (Eigen::Index j = 0; j < a.size(); ++j)
              a[j] = g.mean[j] + std::exp(g.log_std[j]) * normal(rng);
            return a;
          },
      },
      params.descriptor());
}

double policy_log_prob(const PolicyParams& params, const State& state,
                       const Action& action) {
  return std::visit(
      overloaded{
          [&](const TabularSoftmax& d) {
            const std::size_t s = tabular_state(d, state);
            const std::size_t a = tabular_action(d, action);
            const Vector& th = params.theta();
            const auto row = th.segment(static_cast<Eigen::Index>(s * d.actions),
                                        static_cast<Eigen::Index>(d.actions));
            const double mx = row.maxCoeff();
            const double lse = mx + std::log((row.array() - mx).exp().sum());
            const double lp = row[static_cast<Eigen::Index>(a)] - lse;
            if (!std::isfinite(lp))
              throw std::domain_error("policy_log_prob: action has zero probability");
            return lp;
          },
          [&](const LinearGaussian& d) {
            const GaussianView g = gaussian_of(d, params.theta(), gaussian_state(d, state));
            const Vector& a = gaussian_action(d, action);
            double lp = 0.0;
            for (Eigen::Index j = 0; j < a.size(); ++j) {
              const double z = (a[j] - g.mean[j]) * std::exp(-g.log_std[j]);
              lp += -0.5 * z * z - g.log_std[j] -
                    0.5 * std::log(2.0 * std::numbers::pi);
            }
            return lp;
          },
      },
      params.descriptor());
}

void accumulate_grad_log_prob(const PolicyParams& params, const State& state,
                              const Action& action, double scale, Vector& out) {
  std::visit(
      overloaded{
          [&](const TabularSoftmax& d) {
            const std::size_t s = tabular_state(d, state);
            const std::size_t a = tabular_action(d, action);
            const Vector p = softmax_row(params.theta(), s, d.actions);
            const auto off = static_cast<Eigen::Index>(s * d.actions);
            out.segment(off, p.size()) -= scale * p;
            out[off + static_cast<Eigen::Index>(a)] += scale;
          },
          [&](const LinearGaussian& d) {
            const Vector& x = gaussian_state(d, state);
            const GaussianView g = gaussian_of(d, params.theta(), x);
            const Vector& a = gaussian_action(d, action);
            const auto f = static_cast<Eigen::Index>(d.feature_dim);
            const auto k = static_cast<Eigen::Index>(d.action_dim);
            for (Eigen::Index j = 0; j < k; ++j) {
              const double inv_var = std::exp(-2.0 * g.log_std[j]);
              const double diff = a[j] - g.mean[j];
              const double dmean = scale * diff * inv_var;
              const Eigen::Index row = j * (f + 1);
              out.segment(row, f) += dmean * x;
              out[row + f] += dmean;
              out[k * (f + 1) + j] += scale * (diff * diff * inv_var - 1.0);
            }
          },
      },
      params.descriptor());
}

Vector policy_grad_log_prob(const PolicyParams& params, const State& state,
                            const Action& action) {
  Vector g = Vector::Zero(params.theta().size());
  accumulate_grad_log_prob(params, state, action, 1.0, g);
  return g;
}

}  // namespace apd
