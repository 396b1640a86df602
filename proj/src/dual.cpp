#include "apd/dual.hpp"

#include <stdexcept>

namespace apd {

Vector project_nonnegative(const Vector& x) { return x.cwiseMax(0.0); }

Multiplier dual_ascent_step(const Multiplier& lm, double zeta, const Vector& g) {
  if (!(zeta > 0.0))
    throw std::invalid_argument("dual_ascent_step: zeta must be positive");
  if (static_cast<std::size_t>(g.size()) != lm.size())
    throw std::invalid_argument("dual_ascent_step: constraint dimension differs");
  return Multiplier(project_nonnegative(lm.values() + zeta * g));
}

void PidGains::validate() const {
  if (!(kp >= 0.0 && ki >= 0.0 && kd >= 0.0))
    throw std::invalid_argument("PidGains: gains must be nonnegative");
}

PidState PidState::zeros(std::size_t m) {
  PidState s;
  s.integral = Vector::Zero(static_cast<Eigen::Index>(m));
  s.prev_costs = Vector::Zero(static_cast<Eigen::Index>(m));
  return s;
}

std::pair<Multiplier, PidState> pid_dual_step(const PidState& state,
                                              const PidGains& gains,
                                              const Vector& j_costs,
                                              const ConstraintSpec& spec) {
  gains.validate();
  if (j_costs.size() != spec.d.size())
    throw std::invalid_argument("pid_dual_step: cost and threshold dimensions differ");
  const Eigen::Index m = spec.d.size();
  const Vector integral_prev =
      state.integral.size() == m ? state.integral : Vector::Zero(m);
  if (state.initialized && state.prev_costs.size() != m)
    throw std::invalid_argument("pid_dual_step: controller state dimension differs");

  const Vector error = j_costs - spec.d;
  PidState next;
  next.integral = project_nonnegative(integral_prev + error);
  const Vector derivative =
      state.initialized ? Vector(j_costs - state.prev_costs) : Vector(Vector::Zero(m));
  next.prev_costs = j_costs;
  next.initialized = true;

  Vector raw = gains.kp * error + gains.ki * next.integral + gains.kd * derivative;
  return {Multiplier(project_nonnegative(raw)), std::move(next)};
}

}  // namespace apd
