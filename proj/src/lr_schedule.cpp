#include "apd/lr_schedule.hpp"

#include <stdexcept>

namespace apd {

void SmoothnessConstants::validate() const {
  if (!(l_reward >= 0.0) || (l_costs.size() > 0 && !(l_costs.minCoeff() >= 0.0)))
    throw std::invalid_argument("SmoothnessConstants: Lipschitz constants must be nonnegative");
  if (!(mu > 0.0))
    throw std::invalid_argument("SmoothnessConstants: mu must be positive");
  if (mu > l_reward)
    throw std::invalid_argument("SmoothnessConstants: mu cannot exceed L_R");
  if (!(l_value >= 0.0))
    throw std::invalid_argument("SmoothnessConstants: L' must be nonnegative");
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::InvLinExact: return "invlin-exact";
    case ScheduleKind::InvQuaExact: return "invqua-exact";
    case ScheduleKind::InvLinPractical: return "invlin-practical";
    case ScheduleKind::InvQuaPractical: return "invqua-practical";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(std::string_view name) {
  for (auto k : {ScheduleKind::Constant, ScheduleKind::InvLinExact,
                 ScheduleKind::InvQuaExact, ScheduleKind::InvLinPractical,
                 ScheduleKind::InvQuaPractical})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown schedule variant '" + std::string(name) + "'");
}

LrSchedule LrSchedule::constant(double lr) {
  LrSchedule s;
  s.kind = ScheduleKind::Constant;
  s.lr = lr;
  s.validate();
  return s;
}

LrSchedule LrSchedule::invlin_exact(SmoothnessConstants c) {
  LrSchedule s;
  s.kind = ScheduleKind::InvLinExact;
  s.constants = std::move(c);
  s.validate();
  return s;
}

LrSchedule LrSchedule::invqua_exact(SmoothnessConstants c) {
  LrSchedule s;
  s.kind = ScheduleKind::InvQuaExact;
  s.constants = std::move(c);
  s.validate();
  return s;
}

LrSchedule LrSchedule::invlin_practical(double h1, double h2) {
  LrSchedule s;
  s.kind = ScheduleKind::InvLinPractical;
  s.h1 = h1;
  s.h2 = h2;
  s.validate();
  return s;
}

LrSchedule LrSchedule::invqua_practical(double h1, double h2) {
  LrSchedule s;
  s.kind = ScheduleKind::InvQuaPractical;
  s.h1 = h1;
  s.h2 = h2;
  s.validate();
  return s;
}

void LrSchedule::validate() const {
  if (kind == ScheduleKind::Constant && !(lr > 0.0))
    throw std::invalid_argument("LrSchedule: constant learning rate must be positive");
  if (is_practical() && !(h1 > 0.0 && h2 > 0.0))
    throw std::invalid_argument("LrSchedule: H1 and H2 must be positive");
  if (is_exact()) constants.validate();
}

double lipschitz_of_lambda(const SmoothnessConstants& c, const Multiplier& lm) {
  if (static_cast<std::size_t>(c.l_costs.size()) != lm.size())
    throw std::invalid_argument("lipschitz_of_lambda: L_C and lambda dimensions differ");
  return c.l_reward + lm.values().dot(c.l_costs);
}

double exact_lr(ExactVariant variant, const SmoothnessConstants& c,
                const Multiplier& lm) {
  const double l = lipschitz_of_lambda(c, lm);
  if (!(l > 0.0))
    throw std::domain_error("exact_lr: L(lambda) must be positive");
  return variant == ExactVariant::InvLin ? 1.0 / (2.0 * l) : c.mu / (2.0 * l * l);
}

double practical_lr(const LrSchedule& sched, const Multiplier& lm) {
  if (sched.kind == ScheduleKind::Constant) return sched.lr;
  if (!sched.is_practical())
    throw std::invalid_argument("practical_lr: schedule is not a practical variant");
  if (lm.size() != 1 && !sched.sum_multipliers)
    throw std::invalid_argument("practical_lr: practical schedules need a single constraint");
  const double lambda = lm.sum();
  const double base = lambda + sched.h2;
  return sched.kind == ScheduleKind::InvLinPractical ? sched.h1 / base
                                                     : sched.h1 / (base * base);
}

double learning_rate(const LrSchedule& sched, const Multiplier& lm) {
  switch (sched.kind) {
    case ScheduleKind::InvLinExact:
      return exact_lr(ExactVariant::InvLin, sched.constants, lm);
    case ScheduleKind::InvQuaExact:
      return exact_lr(ExactVariant::InvQua, sched.constants, lm);
    default:
      return practical_lr(sched, lm);
  }
}

}  // namespace apd
