#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "apd/cmdp.hpp"
#include "apd/dual.hpp"
#include "apd/lagrangian.hpp"
#include "apd/lr_schedule.hpp"
#include "apd/policy.hpp"
#include "apd/testbed.hpp"

namespace apd {

enum class DualVariant { Ascent, Pid };
enum class PrimalEstimator { Reinforce, Ppol };

struct SolverConfig {
  std::size_t iterations = 1000;
  LrSchedule schedule = LrSchedule::constant(1e-3);
  DualVariant dual = DualVariant::Ascent;
  double zeta = 0.05;  // ascent only
  PidGains pid;        // pid only
  Vector lambda0;      // empty: zeros
  Vector theta0;       // empty: zeros (APD) / the given initial policy (PAPD)
  std::size_t inner_steps = 1;  // APD primal steps per dual step

  // PAPD only.
  ConstraintSpec constraint;
  SamplingConfig sampling;
  PrimalEstimator estimator = PrimalEstimator::Reinforce;
  PpolConfig ppol;
  // Estimate J_C for the dual update on a fresh batch drawn under the
  // updated policy instead of reusing the primal batch.
  bool fresh_cost_batch = false;
  std::uint64_t seed = 0;
};

/// One solver iteration k. theta is the iterate before the primal update,
/// lambda the multiplier that update used. reward/costs are the values fed to
/// the dual update: exact J(theta_{k+1}) for APD, batch estimates for PAPD
/// (under theta_k, or theta_{k+1} with fresh_cost_batch).
struct RunRow {
  std::size_t step = 0;
  Vector theta;
  Vector lambda;
  double lr = 0.0;
  double reward = 0.0;
  Vector costs;
  Vector g;  // costs - d
};

enum class RecordKind { Exact, Stochastic };

struct RunRecord {
  RecordKind kind = RecordKind::Exact;
  DualVariant dual = DualVariant::Ascent;
  ScheduleKind schedule = ScheduleKind::Constant;
  double zeta = 0.0;
  std::size_t inner_steps = 1;
  std::vector<RunRow> rows;
  Vector final_theta;   // theta_K
  Vector final_lambda;  // lambda_K
  // Multiplier with the largest dual value over lambda_0..lambda_K, when the
  // problem exposes its dual function.
  std::optional<Vector> lambda_best;
  std::optional<double> best_dual_value;
  double wall_seconds = 0.0;

  std::size_t size() const { return rows.size(); }
  /// theta_{k+1}
  const Vector& theta_after(std::size_t k) const {
    return k + 1 < rows.size() ? rows[k + 1].theta : final_theta;
  }
  /// lambda_{k+1}
  const Vector& lambda_after(std::size_t k) const {
    return k + 1 < rows.size() ? rows[k + 1].lambda : final_lambda;
  }
};

/// Deterministic adaptive primal-dual loop:
///   theta_{k+1} = theta_k - eta_k grad L(theta_k, lambda_k)
///   lambda_{k+1} = [lambda_k + zeta g(theta_{k+1})]_+   (or the PID rule)
/// with eta_k = learning_rate(schedule, lambda_k).
RunRecord apd_run(const ConstrainedProgram& problem, const SolverConfig& cfg);

/// As apd_run, additionally tracking lambda_best through the testbed's
/// exact dual function.
RunRecord apd_run(const QuadProgram& problem, const SolverConfig& cfg);

/// Practical adaptive primal-dual loop on a sampled CMDP: practical (or
/// constant) learning rate at lambda_k, one REINFORCE step or PPOL epochs on
/// a fresh batch, then the PID-Lagrangian multiplier update.
RunRecord papd_run(const Cmdp& cmdp, const PolicyParams& initial,
                   const SolverConfig& cfg);

}  // namespace apd
