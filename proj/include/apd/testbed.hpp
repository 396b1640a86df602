#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "apd/cmdp.hpp"
#include "apd/lagrangian.hpp"
#include "apd/lr_schedule.hpp"

namespace apd {

using Matrix = Eigen::MatrixXd;

/// A deterministic constrained program: maximize J_R(theta) subject to
/// J_C(theta) <= d, with exact objective values and Lagrangian gradients.
class ConstrainedProgram {
 public:
  virtual ~ConstrainedProgram() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t constraint_count() const = 0;
  virtual double reward(const Vector& theta) const = 0;
  virtual Vector costs(const Vector& theta) const = 0;
  /// grad_theta [-J_R + lambda^T (J_C - d)]
  virtual Vector lagrangian_grad(const Vector& theta, const Multiplier& lm) const = 0;
  virtual const ConstraintSpec& constraint() const = 0;
  virtual SmoothnessConstants smoothness() const = 0;

  double lagrangian(const Vector& theta, const Multiplier& lm) const {
    return lagrangian_value(reward(theta), costs(theta), lm, constraint());
  }
};

/// maximize -1/2 theta^T Q theta + b^T theta
/// s.t.       1/2 theta^T P theta + c^T theta <= d
/// with Q symmetric positive definite and P symmetric positive semidefinite.
class QuadProgram final : public ConstrainedProgram {
 public:
  QuadProgram(Matrix q, Vector b, Matrix p, Vector c, double d);

  /// Q = P = I_2, b = (1, 1), c = 0, d = 0.5.
  static QuadProgram default_instance();

  std::size_t dimension() const override { return static_cast<std::size_t>(b_.size()); }
  std::size_t constraint_count() const override { return 1; }
  double reward(const Vector& theta) const override;
  Vector costs(const Vector& theta) const override;
  double cost(const Vector& theta) const;
  Vector lagrangian_grad(const Vector& theta, const Multiplier& lm) const override;
  const ConstraintSpec& constraint() const override { return spec_; }
  /// L_R = lambda_max(Q), L_C = [lambda_max(P)], mu = lambda_min(Q).
  SmoothnessConstants smoothness() const override { return constants_; }

  const Matrix& q() const { return q_; }
  const Vector& b() const { return b_; }
  const Matrix& p() const { return p_; }
  const Vector& c() const { return c_; }
  double threshold() const { return spec_.d[0]; }

 private:
  Matrix q_;
  Vector b_;
  Matrix p_;
  Vector c_;
  ConstraintSpec spec_;
  SmoothnessConstants constants_;
};

QuadProgram quad_make(Matrix q, Vector b, Matrix p, Vector c, double d);

/// argmin_theta L(theta, lambda) = (Q + lambda P)^{-1} (b - lambda c).
Vector quad_primal_min(const QuadProgram& prog, const Multiplier& lm);

/// Dual function d(lambda) = min_theta L(theta, lambda).
double quad_dual_value(const QuadProgram& prog, const Multiplier& lm);

struct KktSolution {
  Vector theta;
  double lambda = 0.0;
  double dual_value = 0.0;  // D*
};

/// Saddle point of the testbed. lambda* = 0 when the unconstrained maximizer
/// is feasible, otherwise the root of J_C(theta*(lambda)) = d by bisection on
/// a doubling bracket to 1e-12.
KktSolution quad_kkt_solve(const QuadProgram& prog);

}  // namespace apd
