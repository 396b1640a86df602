#include "apd/testbed.hpp"

#include <cmath>
#include <stdexcept>

namespace apd {

namespace {

constexpr double kEigenTol = 1e-10;
constexpr double kBisectionTol = 1e-12;

Eigen::VectorXd symmetric_spectrum(const Matrix& m, const char* name) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(name) + " must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kEigenTol * scale)
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
}

}  // namespace

QuadProgram::QuadProgram(Matrix q, Vector b, Matrix p, Vector c, double d)
    : q_(std::move(q)), b_(std::move(b)), p_(std::move(p)), c_(std::move(c)) {
  const Eigen::Index n = b_.size();
  if (n == 0) throw std::invalid_argument("QuadProgram: empty problem");
  if (q_.rows() != n || p_.rows() != n || c_.size() != n)
    throw std::invalid_argument("QuadProgram: inconsistent dimensions");
  const Vector eq = symmetric_spectrum(q_, "Q");
  const Vector ep = symmetric_spectrum(p_, "P");
  if (!(eq.minCoeff() > kEigenTol))
    throw std::invalid_argument("QuadProgram: Q must be positive definite");
  if (ep.minCoeff() < -kEigenTol)
    throw std::invalid_argument("QuadProgram: P must be positive semidefinite");
  if (!std::isfinite(d)) throw std::invalid_argument("QuadProgram: d must be finite");

  spec_.d = Vector::Constant(1, d);
  constants_.l_reward = eq.maxCoeff();
  constants_.l_costs = Vector::Constant(1, std::max(0.0, ep.maxCoeff()));
  constants_.mu = eq.minCoeff();
}

QuadProgram QuadProgram::default_instance() {
  return QuadProgram(Matrix::Identity(2, 2), Vector::Ones(2),
                     Matrix::Identity(2, 2), Vector::Zero(2), 0.5);
}

QuadProgram quad_make(Matrix q, Vector b, Matrix p, Vector c, double d) {
  return QuadProgram(std::move(q), std::move(b), std::move(p), std::move(c), d);
}

double QuadProgram::reward(const Vector& theta) const {
  return -0.5 * theta.dot(q_ * theta) + b_.dot(theta);
}

double QuadProgram::cost(const Vector& theta) const {
  return 0.5 * theta.dot(p_ * theta) + c_.dot(theta);
}

Vector QuadProgram::costs(const Vector& theta) const {
  return Vector::Constant(1, cost(theta));
}

Vector QuadProgram::lagrangian_grad(const Vector& theta, const Multiplier& lm) const {
  if (lm.size() != 1)
    throw std::invalid_argument("QuadProgram: single multiplier expected");
  const double lambda = lm[0];
  return (q_ + lambda * p_) * theta - b_ + lambda * c_;
}

Vector quad_primal_min(const QuadProgram& prog, const Multiplier& lm) {
  if (lm.size() != 1)
    throw std::invalid_argument("quad_primal_min: single multiplier expected");
  const double lambda = lm[0];
  const Matrix h = prog.q() + lambda * prog.p();
  return h.llt().solve(prog.b() - lambda * prog.c());
}

double quad_dual_value(const QuadProgram& prog, const Multiplier& lm) {
  return prog.lagrangian(quad_primal_min(prog, lm), lm);
}

KktSolution quad_kkt_solve(const QuadProgram& prog) {
  // Slater: inf J_C < d. J_C is unbounded below when c leaves range(P).
  {
    const auto cod = prog.p().completeOrthogonalDecomposition();
    const Vector theta_min = cod.solve(-prog.c());
    const bool bounded =
        (prog.p() * theta_min + prog.c()).norm() <= 1e-9 * std::max(1.0, prog.c().norm());
    if (bounded && !(prog.cost(theta_min) < prog.threshold()))
      throw std::domain_error("quad_kkt_solve: no strictly feasible point exists");
  }

  auto violation = [&](double lambda) {
    return prog.cost(quad_primal_min(prog, Multiplier::scalar(lambda))) - prog.threshold();
  };

  KktSolution sol;
  if (violation(0.0) <= 0.0) {
    sol.lambda = 0.0;
  } else {
    double lo = 0.0, hi = 1.0;
    int doublings = 0;
    while (violation(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 200)
        throw std::runtime_error("quad_kkt_solve: failed to bracket lambda*");
    }
    while (hi - lo > kBisectionTol) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (violation(mid) > 0.0 ? lo : hi) = mid;
    }
    sol.lambda = 0.5 * (lo + hi);
  }
  const Multiplier star = Multiplier::scalar(sol.lambda);
  sol.theta = quad_primal_min(prog, star);
  sol.dual_value = quad_dual_value(prog, star);
  return sol;
}

}  // namespace apd
