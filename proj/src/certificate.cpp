#include "apd/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace apd {

double dual_gap_asymptotic_term(double zeta, double cost_bound, double gamma,
                                double d_norm) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("dual_gap_asymptotic_term: gamma must lie in [0, 1)");
  const double one_minus = 1.0 - gamma;
  const double num = cost_bound + one_minus * d_norm;
  return zeta * num * num / (2.0 * one_minus * one_minus);
}

namespace {

std::optional<double> scaled_root(double scale, double radicand) {
  if (radicand < 0.0) return std::nullopt;
  return scale * std::sqrt(radicand);
}

void keep_min(std::optional<double>& worst, const std::optional<double>& v) {
  if (v && (!worst || *v < *worst)) worst = v;
}

}  // namespace

std::optional<double> primal_error_bound_smooth(double l_value, double mu,
                                                double lipschitz, double delta,
                                                double grad_sq, double eta) {
  return scaled_root(l_value, 2.0 / mu *
                                  (lipschitz * delta +
                                   (lipschitz * eta * eta - eta) * grad_sq));
}

std::optional<double> primal_error_bound_contraction(double l_value, double mu,
                                                     double lipschitz,
                                                     double delta, double eta) {
  return scaled_root(l_value,
                     (1.0 + eta * eta * lipschitz * lipschitz - eta * mu) * delta);
}

std::optional<double> invlin_error_bound(double l_value, double mu,
                                         double lipschitz, double delta) {
  return scaled_root(l_value, 2.0 * delta / mu *
                                  (lipschitz - mu * mu / (16.0 * lipschitz)));
}

std::optional<double> invqua_error_bound(double l_value, double mu,
                                         double lipschitz, double delta) {
  return scaled_root(l_value,
                     delta * (1.0 - mu * mu / (4.0 * lipschitz * lipschitz)));
}

BoundCertificate verify_bounds(const RunRecord& record, const QuadProgram& problem,
                               const SmoothnessConstants& constants, double zeta,
                               const CertificateOptions& options) {
  if (record.kind != RecordKind::Exact)
    throw std::invalid_argument("verify_bounds: certificates need an exact (APD) record");
  if (record.dual != DualVariant::Ascent)
    throw std::invalid_argument("verify_bounds: certificates assume the projected ascent dual update");
  if (record.rows.empty())
    throw std::invalid_argument("verify_bounds: empty record");
  if (!(zeta > 0.0))
    throw std::invalid_argument("verify_bounds: zeta must be positive");
  if (!(options.gamma > 0.0 && options.gamma < 1.0))
    throw std::invalid_argument("verify_bounds: gamma must lie in (0, 1)");

  const std::size_t k_total = record.rows.size();
  const KktSolution kkt = quad_kkt_solve(problem);
  const double d_norm = problem.constraint().d.norm();
  const double mu = constants.mu;

  BoundCertificate cert;
  cert.lambda_star = kkt.lambda;
  cert.dual_optimum = kkt.dual_value;
  cert.gamma = options.gamma;

  // L' over the iterate hull: the gradient norm of L(., lambda_k) is convex,
  // so its maximum over each segment sits at an endpoint.
  double l_value = constants.l_value;
  if (!(l_value > 0.0)) {
    double max_grad = 0.0;
    for (std::size_t k = 0; k < k_total; ++k) {
      const Multiplier lm(record.rows[k].lambda);
      max_grad = std::max({max_grad,
                           problem.lagrangian_grad(record.rows[k].theta, lm).norm(),
                           problem.lagrangian_grad(record.theta_after(k), lm).norm()});
    }
    l_value = options.lipschitz_safety * max_grad;
  }
  cert.l_value = l_value;

  double max_cost = 0.0;
  for (const RunRow& row : record.rows) max_cost = std::max(max_cost, row.costs.norm());
  cert.cost_bound = options.cost_bound ? *options.cost_bound
                                       : (1.0 - options.gamma) * max_cost;
  cert.asymptotic_term = dual_gap_asymptotic_term(zeta, cert.cost_bound, options.gamma, d_norm);

  const double lambda0_sq = record.rows.front().lambda.squaredNorm();
  const double lambda0_gap_sq =
      (record.rows.front().lambda - Vector::Constant(1, kkt.lambda)).squaredNorm();
  const double reward_star = problem.reward(kkt.theta);

  double eps_sum = 0.0, reward_sum = 0.0;
  double best_dual = quad_dual_value(problem, Multiplier(record.rows.front().lambda));
  double prev_gap = kkt.dual_value - best_dual;
  cert.worst_dual_gap_slack = std::numeric_limits<double>::infinity();
  cert.worst_primal_average_slack = std::numeric_limits<double>::infinity();

  const bool single_step = record.inner_steps == 1;
  for (std::size_t k = 0; k < k_total; ++k) {
    const RunRow& row = record.rows[k];
    const Multiplier lm(row.lambda);
    const Vector& theta_next = record.theta_after(k);
    const Vector theta_opt = quad_primal_min(problem, lm);
    const double dual_k = problem.lagrangian(theta_opt, lm);
    const double lip = lipschitz_of_lambda(constants, lm);
    const double grad_sq = problem.lagrangian_grad(row.theta, lm).squaredNorm();

    IterationSlack s;
    s.k = k;
    s.epsilon = problem.lagrangian(theta_next, lm) - dual_k;
    s.delta = (row.theta - theta_opt).squaredNorm();

    eps_sum += s.epsilon;
    reward_sum += problem.reward(theta_next);
    const double kk = static_cast<double>(k + 1);

    best_dual = std::max(best_dual, quad_dual_value(problem, Multiplier(record.lambda_after(k))));
    s.dual_gap = kkt.dual_value - best_dual;
    const double gap_bound = lambda0_gap_sq / (2.0 * zeta * kk) + cert.asymptotic_term + eps_sum / kk;
    s.dual_gap_slack = gap_bound - s.dual_gap;
    if (s.dual_gap < -options.tol) cert.dual_gap_nonnegative = false;
    if (s.dual_gap > prev_gap + options.tol) cert.dual_gap_monotone = false;
    prev_gap = s.dual_gap;

    const double primal_floor = reward_star - eps_sum / kk - cert.asymptotic_term -
                                lambda0_sq / (2.0 * zeta * kk);
    s.primal_average_slack = reward_sum / kk - primal_floor;

    cert.worst_dual_gap_slack = std::min(cert.worst_dual_gap_slack, s.dual_gap_slack);
    cert.worst_primal_average_slack =
        std::min(cert.worst_primal_average_slack, s.primal_average_slack);

    if (single_step) {
      const auto smooth = primal_error_bound_smooth(l_value, mu, lip, s.delta, grad_sq, row.lr);
      const auto contraction = primal_error_bound_contraction(l_value, mu, lip, s.delta, row.lr);
      if (smooth) s.smooth_slack = *smooth - s.epsilon;
      if (contraction) s.contraction_slack = *contraction - s.epsilon;
      if (!smooth || !contraction) s.radicand_negative = true;

      std::optional<double> closed;
      if (record.schedule == ScheduleKind::InvLinExact)
        closed = invlin_error_bound(l_value, mu, lip, s.delta);
      else if (record.schedule == ScheduleKind::InvQuaExact)
        closed = invqua_error_bound(l_value, mu, lip, s.delta);
      if (closed) s.optimal_rate_slack = *closed - s.epsilon;

      // The closed-form rates minimize their bounds: probe half and double.
      const double eta_lin = 1.0 / (2.0 * lip);
      const double eta_qua = mu / (2.0 * lip * lip);
      auto smooth_at = [&](double eta) {
        return primal_error_bound_smooth(l_value, mu, lip, s.delta, grad_sq, eta);
      };
      auto contraction_at = [&](double eta) {
        return primal_error_bound_contraction(l_value, mu, lip, s.delta, eta);
      };
      const auto a0 = smooth_at(eta_lin), a1 = smooth_at(0.5 * eta_lin), a2 = smooth_at(2.0 * eta_lin);
      const auto b0 = contraction_at(eta_qua), b1 = contraction_at(0.5 * eta_qua),
                 b2 = contraction_at(2.0 * eta_qua);
      if (a0 && a1 && a2 && b0 && b1 && b2) {
        s.optimality_holds = *a0 <= *a1 + options.tol && *a0 <= *a2 + options.tol &&
                             *b0 <= *b1 + options.tol && *b0 <= *b2 + options.tol;
        if (!*s.optimality_holds) cert.optimality_ok = false;
      } else {
        s.radicand_negative = true;
      }
      if (s.radicand_negative) ++cert.flagged;
      keep_min(cert.worst_smooth_slack, s.smooth_slack);
      keep_min(cert.worst_contraction_slack, s.contraction_slack);
      keep_min(cert.worst_optimal_rate_slack, s.optimal_rate_slack);
    }
    cert.rows.push_back(s);
  }

  auto ok = [&](const std::optional<double>& v) { return !v || *v >= -options.tol; };
  cert.passed = cert.worst_dual_gap_slack >= -options.tol &&
                cert.worst_primal_average_slack >= -options.tol &&
                ok(cert.worst_smooth_slack) && ok(cert.worst_contraction_slack) &&
                ok(cert.worst_optimal_rate_slack) && cert.optimality_ok &&
                cert.dual_gap_monotone && cert.dual_gap_nonnegative;
  return cert;
}

std::string BoundCertificate::summary() const {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream o;
    o << std::scientific << std::setprecision(3) << *v;
    return o.str();
  };
  os << std::setprecision(9) << "lambda*=" << lambda_star << " D*=" << dual_optimum << " L'=" << l_value
     << " B=" << cost_bound << " zeta-term=" << asymptotic_term << "\n"
     << "worst slack: dual-gap=" << opt(worst_dual_gap_slack)
     << " primal-average=" << opt(worst_primal_average_slack)
     << " smooth=" << opt(worst_smooth_slack)
     << " contraction=" << opt(worst_contraction_slack)
     << " closed-form=" << opt(worst_optimal_rate_slack) << "\n"
     << "flagged=" << flagged << " optimality=" << (optimality_ok ? "ok" : "FAIL")
     << " gap>=0=" << (dual_gap_nonnegative ? "ok" : "FAIL")
     << " monotone-gap=" << (dual_gap_monotone ? "ok" : "FAIL")
     << " => " << (passed ? "PASS" : "FAIL");
  return os.str();
}

FeasibilityReport feasibility_check(const RunRecord& record, const ConstraintSpec& spec,
                                    const FeasibilityOptions& options) {
  if (record.rows.empty())
    throw std::invalid_argument("feasibility_check: empty record");
  if (!(options.window > 0.0 && options.window <= 1.0))
    throw std::invalid_argument("feasibility_check: window must lie in (0, 1]");
  const std::size_t k_total = record.rows.size();
  const Eigen::Index m = spec.d.size();

  FeasibilityReport rep;
  rep.running_average.resize(static_cast<Eigen::Index>(k_total), m);
  Vector sum = Vector::Zero(m);
  for (std::size_t k = 0; k < k_total; ++k) {
    if (record.rows[k].costs.size() != m)
      throw std::invalid_argument("feasibility_check: cost dimension differs from the thresholds");
    sum += record.rows[k].costs;
    rep.running_average.row(static_cast<Eigen::Index>(k)) =
        (sum / static_cast<double>(k + 1)).transpose();
  }
  rep.full_average = sum / static_cast<double>(k_total);

  const std::size_t w = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(options.window * static_cast<double>(k_total))));
  Vector wsum = Vector::Zero(m);
  for (std::size_t k = k_total - w; k < k_total; ++k) wsum += record.rows[k].costs;
  rep.window_average = wsum / static_cast<double>(w);

  const Vector limit = spec.d.array() + options.tol;
  rep.passed = (rep.full_average.array() <= limit.array()).all() &&
               (rep.window_average.array() <= limit.array()).all();

  if (options.zeta) {
    // Average of g over rows 0..K-1 is at most (lambda_K - lambda_0) / (zeta K).
    const Vector& lambda0 = record.rows.front().lambda;
    const auto first = static_cast<std::size_t>(
        std::ceil(options.transient * static_cast<double>(k_total)));
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = std::max<std::size_t>(first, 1); k <= k_total; ++k) {
      const Vector avg_g = rep.running_average.row(static_cast<Eigen::Index>(k - 1)).transpose() - spec.d;
      const Vector envelope =
          (record.lambda_after(k - 1) - lambda0) / (*options.zeta * static_cast<double>(k));
      worst = std::min(worst, (envelope - avg_g).minCoeff());
    }
    rep.worst_envelope_slack = worst;
    if (worst < -1e-12) rep.passed = false;
  }
  return rep;
}

}  // namespace apd
