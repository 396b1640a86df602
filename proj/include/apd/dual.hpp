#pragma once

#include <utility>

#include "apd/cmdp.hpp"
#include "apd/lagrangian.hpp"

namespace apd {

/// Componentwise max(0, x).
Vector project_nonnegative(const Vector& x);

/// Projected dual gradient ascent: [lambda + zeta g]_+.
Multiplier dual_ascent_step(const Multiplier& lm, double zeta, const Vector& g);

struct PidGains {
  double kp = 0.05;
  double ki = 0.0005;
  double kd = 0.1;

  void validate() const;
};

/// Controller memory carried between iterations.
struct PidState {
  Vector integral;    // I^k, componentwise >= 0
  Vector prev_costs;  // J_C^{k-1}
  bool initialized = false;

  static PidState zeros(std::size_t m);
};

/// PID-Lagrangian update, applied independently per constraint:
///   I^k      = [I^{k-1} + J_C^k - d]_+
///   lambda_k = [K_P (J_C^k - d) + K_I I^k + K_D (J_C^k - J_C^{k-1})]_+
/// lambda is recomputed from the three terms rather than incremented. The
/// derivative term is zero on the first call.
std::pair<Multiplier, PidState> pid_dual_step(const PidState& state,
                                              const PidGains& gains,
                                              const Vector& j_costs,
                                              const ConstraintSpec& spec);

}  // namespace apd
