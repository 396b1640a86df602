#pragma once

#include <string>
#include <string_view>

#include "apd/cmdp.hpp"
#include "apd/lagrangian.hpp"

namespace apd {

/// Smoothness/curvature constants of the Lagrangian in theta.
struct SmoothnessConstants {
  double l_reward = 0.0;  // L_R, gradient Lipschitz constant of J_R
  Vector l_costs;         // L_C, one per constraint
  double mu = 0.0;        // strong convexity modulus
  double l_value = 0.0;   // L', Lipschitz constant of the Lagrangian value

  /// Throws unless L_R, L_C >= 0, 0 < mu <= L_R.
  void validate() const;
};

enum class ScheduleKind {
  Constant,
  InvLinExact,
  InvQuaExact,
  InvLinPractical,
  InvQuaPractical,
};

std::string_view to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(std::string_view name);

/// Primal learning-rate rule.
struct LrSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double lr = 0.0;            // Constant
  double h1 = 0.0, h2 = 0.0;  // practical variants (H1, H2) or (H1', H2')
  SmoothnessConstants constants;  // exact variants
  // Practical variants with several constraints use sum(lambda) in place of
  // the scalar multiplier when set; otherwise they require m = 1.
  bool sum_multipliers = false;

  static LrSchedule constant(double lr);
  static LrSchedule invlin_exact(SmoothnessConstants c);
  static LrSchedule invqua_exact(SmoothnessConstants c);
  static LrSchedule invlin_practical(double h1, double h2);
  static LrSchedule invqua_practical(double h1, double h2);

  bool is_exact() const {
    return kind == ScheduleKind::InvLinExact || kind == ScheduleKind::InvQuaExact;
  }
  bool is_practical() const {
    return kind == ScheduleKind::InvLinPractical ||
           kind == ScheduleKind::InvQuaPractical;
  }
  void validate() const;
};

/// L(lambda) = L_R + lambda^T L_C
double lipschitz_of_lambda(const SmoothnessConstants& c, const Multiplier& lm);

enum class ExactVariant { InvLin, InvQua };

/// InvLin: 1 / (2 L(lambda)).  InvQua: mu / (2 L(lambda)^2).
double exact_lr(ExactVariant variant, const SmoothnessConstants& c,
                const Multiplier& lm);

/// InvLin: H1 / (lambda + H2).  InvQua: H1' / (lambda + H2')^2.
/// The constant variant ignores lambda.
double practical_lr(const LrSchedule& sched, const Multiplier& lm);

/// Step size of any schedule at multiplier `lm`.
double learning_rate(const LrSchedule& sched, const Multiplier& lm);

}  // namespace apd
