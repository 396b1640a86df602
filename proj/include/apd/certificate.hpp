#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "apd/lagrangian.hpp"
#include "apd/lr_schedule.hpp"
#include "apd/solver.hpp"
#include "apd/testbed.hpp"

namespace apd {

/// zeta (B + (1 - gamma) |d|)^2 / (2 (1 - gamma)^2): the K-independent term
/// of the dual-gap and primal-average bounds.
double dual_gap_asymptotic_term(double zeta, double cost_bound, double gamma,
                                double d_norm);

/// Upper bound on the primal error after one gradient step of size eta,
/// from smoothness and strong convexity (first form). Returns nullopt when
/// the radicand is negative.
std::optional<double> primal_error_bound_smooth(double l_value, double mu,
                                                double lipschitz, double delta,
                                                double grad_sq, double eta);

/// Contraction form of the same bound.
std::optional<double> primal_error_bound_contraction(double l_value, double mu,
                                                     double lipschitz,
                                                     double delta, double eta);

/// Bound at eta = 1 / (2 L): L' sqrt(2 delta / mu (L - mu^2 / (16 L))).
std::optional<double> invlin_error_bound(double l_value, double mu,
                                         double lipschitz, double delta);

/// Bound at eta = mu / (2 L^2): L' sqrt(delta (1 - mu^2 / (4 L^2))).
std::optional<double> invqua_error_bound(double l_value, double mu,
                                         double lipschitz, double delta);

struct CertificateOptions {
  double gamma = 0.99;
  // Per-step cost bound B. When unset, B = (1 - gamma) max_k |J_C(theta_{k+1})|
  // so that B / (1 - gamma) + |d| bounds every observed |g|.
  std::optional<double> cost_bound;
  double tol = 1e-9;
  double lipschitz_safety = 1.1;
};

/// Slack of every checked inequality at iteration k (bound minus measured
/// value; negative means violated). Entries are nullopt where a check does
/// not apply or its radicand is negative.
struct IterationSlack {
  std::size_t k = 0;
  double epsilon = 0.0;  // L(theta_{k+1}, lambda_k) - min_theta L(theta, lambda_k)
  double delta = 0.0;    // |theta_k - theta*(lambda_k)|^2
  double dual_gap = 0.0;          // D* - max_{j <= k+1} d(lambda_j)
  double dual_gap_slack = 0.0;    // averaged-error bound with K' = k + 1
  double primal_average_slack = 0.0;  // liminf bound with K' = k + 1
  std::optional<double> smooth_slack;       // first-form bound at eta_k
  std::optional<double> contraction_slack;  // contraction bound at eta_k
  std::optional<double> optimal_rate_slack; // closed-form bound of the run's schedule
  bool radicand_negative = false;
  std::optional<bool> optimality_holds;     // bound(eta*) <= bound(eta*/2), bound(2 eta*)
};

struct BoundCertificate {
  std::vector<IterationSlack> rows;
  double lambda_star = 0.0;
  double dual_optimum = 0.0;  // D*
  double l_value = 0.0;       // L' used
  double cost_bound = 0.0;    // B used
  double gamma = 0.0;
  double asymptotic_term = 0.0;
  std::size_t flagged = 0;    // iterations with a negative radicand
  double worst_dual_gap_slack = 0.0;
  double worst_primal_average_slack = 0.0;
  std::optional<double> worst_smooth_slack;
  std::optional<double> worst_contraction_slack;
  std::optional<double> worst_optimal_rate_slack;
  bool optimality_ok = true;
  bool dual_gap_monotone = true;
  bool dual_gap_nonnegative = true;
  bool passed = false;

  std::string summary() const;
};

/// Re-evaluates every bound along an exact testbed run. Throws for
/// stochastic records or records not produced by dual ascent.
BoundCertificate verify_bounds(const RunRecord& record, const QuadProgram& problem,
                               const SmoothnessConstants& constants, double zeta,
                               const CertificateOptions& options = {});

struct FeasibilityOptions {
  double window = 0.2;  // trailing fraction of iterations
  double tol = 1e-2;  // allowance on the averages
  // With a dual-ascent step size, also check the running average of g
  // against (lambda_K - lambda_0) / (zeta K) after `transient` of the run.
  std::optional<double> zeta;
  double transient = 0.1;
};

struct FeasibilityReport {
  Eigen::MatrixXd running_average;  // K x m, average of J_C over rows 0..k
  Vector full_average;
  Vector window_average;
  bool passed = false;
  std::optional<double> worst_envelope_slack;
};

FeasibilityReport feasibility_check(const RunRecord& record, const ConstraintSpec& spec,
                                    const FeasibilityOptions& options = {});

}  // namespace apd
