#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "apd/policy.hpp"
#include "support.hpp"

using namespace apd;

TEST_CASE("uniform tabular policy samples each action about equally") {
  const auto pol = PolicyParams::uniform_tabular(3, 4);
  Rng rng(11);
  std::vector<int> counts(4, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[std::get<std::size_t>(policy_act(pol, State{std::size_t{1}}, rng))];
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - n * 0.25) <= 3.0 * sigma);
}

TEST_CASE("near-deterministic Gaussian acts at its mean") {
  PolicyParams pol = PolicyParams::linear_gaussian(3, 2, std::log(1e-8));
  Vector theta = pol.theta();
  for (Eigen::Index i = 0; i < 8; ++i) theta[i] = 0.1 * static_cast<double>(i + 1);
  pol = pol.with_theta(theta);
  const Vector x = (Vector(3) << 1.0, -2.0, 0.5).finished();
  // mean = W[:, :3] x + W[:, 3]
  const Vector mean = (Vector(2) << 0.1 - 0.4 + 0.15 + 0.4, 0.5 - 1.2 + 0.35 + 0.8).finished();
  Rng rng(0);
  const Vector a = std::get<Vector>(policy_act(pol, State{x}, rng));
  CHECK((a - mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("policy_act is reproducible for a fixed seed") {
  const auto pol = PolicyParams::linear_gaussian(4, 2);
  Rng r1(9), r2(9);
  const State s{Vector(Vector::Ones(4))};
  CHECK(std::get<Vector>(policy_act(pol, s, r1)) == std::get<Vector>(policy_act(pol, s, r2)));
}

TEST_CASE("log probabilities") {
  const auto tab = PolicyParams::uniform_tabular(2, 4);
  CHECK(policy_log_prob(tab, State{std::size_t{0}}, Action{std::size_t{3}}) ==
        doctest::Approx(-std::log(4.0)).epsilon(1e-15));

  const double sigma = 0.5;
  const auto g = PolicyParams::linear_gaussian(4, 3, std::log(sigma));
  const double at_mean = policy_log_prob(g, State{Vector(Vector::Ones(4))}, Action{Vector(Vector::Zero(3))});
  CHECK(at_mean == doctest::Approx(-1.5 * std::log(2.0 * std::numbers::pi * sigma * sigma)).epsilon(1e-14));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  Vector theta(12);
  for (auto& v : theta) v = n(rng);
  const PolicyParams p(TabularSoftmax{3, 4}, theta);
  for (std::size_t s = 0; s < 3; ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < 4; ++a) total += std::exp(policy_log_prob(p, State{s}, Action{a}));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(action_probabilities(p, s).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("zero-probability actions and mismatched inputs are errors") {
  Vector theta = Vector::Zero(4);
  theta[1] = -std::numeric_limits<double>::infinity();
  const PolicyParams p(TabularSoftmax{2, 2}, theta);
  CHECK_THROWS_AS(policy_log_prob(p, State{std::size_t{0}}, Action{std::size_t{1}}), std::domain_error);
  CHECK_THROWS_AS(PolicyParams(TabularSoftmax{2, 2}, Vector::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(policy_log_prob(p, State{Vector(Vector::Zero(2))}, Action{std::size_t{0}}),
                  std::invalid_argument);
  const auto g = PolicyParams::linear_gaussian(4, 2);
  CHECK_THROWS_AS(policy_log_prob(g, State{Vector(Vector::Zero(3))}, Action{Vector(Vector::Zero(2))}),
                  std::invalid_argument);
  Rng rng(0);
  CHECK_THROWS_AS(policy_act(g, State{std::size_t{0}}, rng), std::invalid_argument);
}

TEST_CASE("softmax score at equal logits") {
  const auto p = PolicyParams::uniform_tabular(1, 2);
  const Vector g = policy_grad_log_prob(p, State{std::size_t{0}}, Action{std::size_t{0}});
  CHECK(g[0] == doctest::Approx(0.5));
  CHECK(g[1] == doctest::Approx(-0.5));
}

TEST_CASE("score identity holds exactly for tabular softmax") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    Vector theta(15);
    for (auto& v : theta) v = n(rng);
    const PolicyParams p(TabularSoftmax{3, 5}, theta);
    for (std::size_t s = 0; s < 3; ++s) {
      const Vector pi = action_probabilities(p, s);
      Vector acc = Vector::Zero(15);
      for (std::size_t a = 0; a < 5; ++a)
        acc += pi[static_cast<Eigen::Index>(a)] * policy_grad_log_prob(p, State{s}, Action{a});
      CHECK(acc.cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("score functions match central differences") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int probe = 0; probe < 50; ++probe) {
    Vector theta(12);
    for (auto& v : theta) v = n(rng);
    const PolicyParams tab(TabularSoftmax{3, 4}, theta);
    const State s{static_cast<std::size_t>(probe % 3)};
    const Action a{static_cast<std::size_t>(probe % 4)};
    const auto f = [&](const Vector& t) { return policy_log_prob(tab.with_theta(t), s, a); };
    CHECK(test::relative_error(policy_grad_log_prob(tab, s, a), test::central_difference(f, theta, 1e-5)) < 1e-5);

    Vector gtheta(3 * 5 + 3);
    for (auto& v : gtheta) v = 0.5 * n(rng);
    const PolicyParams gp(LinearGaussian{4, 3}, gtheta);
    Vector x(4), u(3);
    for (auto& v : x) v = n(rng);
    for (auto& v : u) v = n(rng);
    const auto fg = [&](const Vector& t) { return policy_log_prob(gp.with_theta(t), State{x}, Action{u}); };
    CHECK(test::relative_error(policy_grad_log_prob(gp, State{x}, Action{u}),
                               test::central_difference(fg, gtheta, 1e-5)) < 1e-5);
  }
}
