#include <doctest.h>

#include <cmath>

#include "apd/envs.hpp"
#include "apd/solver.hpp"

using namespace apd;

namespace {

SolverConfig testbed_config(ScheduleKind kind, std::size_t iterations = 10000) {
  const QuadProgram p = QuadProgram::default_instance();
  SolverConfig cfg;
  cfg.iterations = iterations;
  cfg.schedule = kind == ScheduleKind::InvLinExact ? LrSchedule::invlin_exact(p.smoothness())
                                                  : LrSchedule::invqua_exact(p.smoothness());
  cfg.zeta = 0.05;
  return cfg;
}

GridworldSpec open_grid() {
  GridworldSpec g;
  g.width = 4;
  g.height = 4;
  g.goal_cell = {3, 3};
  g.step_reward = -0.05;
  g.goal_reward = 1.0;
  g.slip_prob = 0.05;
  g.gamma = 0.95;
  return g;
}

SolverConfig papd_config(std::size_t iterations) {
  SolverConfig cfg;
  cfg.iterations = iterations;
  cfg.dual = DualVariant::Pid;
  cfg.schedule = LrSchedule::constant(0.05);
  cfg.constraint.d = Vector::Constant(1, 10.0);
  cfg.sampling = SamplingConfig{16, 40, 0};
  cfg.seed = 42;
  return cfg;
}

double mean_return(const RunRecord& r, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += r.rows[i].reward;
  return s / static_cast<double>(end - begin);
}

}  // namespace

TEST_CASE("APD converges to the KKT point with both exact schedules") {
  const QuadProgram p = QuadProgram::default_instance();
  const KktSolution kkt = quad_kkt_solve(p);
  for (auto kind : {ScheduleKind::InvLinExact, ScheduleKind::InvQuaExact}) {
    const RunRecord r = apd_run(p, testbed_config(kind));
    CHECK(r.size() == 10000);
    CHECK(std::abs(r.final_lambda[0] - kkt.lambda) <= 1e-3);
    CHECK((r.final_theta - kkt.theta).norm() <= 1e-3);
    REQUIRE(r.lambda_best);
    CHECK(std::abs((*r.lambda_best)[0] - kkt.lambda) <= 1e-3);
  }
}

TEST_CASE("APD records: nonnegative multipliers and exact step sizes") {
  const QuadProgram p = QuadProgram::default_instance();
  const RunRecord r = apd_run(p, testbed_config(ScheduleKind::InvLinExact, 2000));
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < r.size(); ++k) {
    const RunRow& row = r.rows[k];
    CHECK(row.step == k);
    CHECK(row.lambda.minCoeff() >= 0.0);
    CHECK(row.lr == 1.0 / (2.0 * (1.0 + row.lambda[0])));
    CHECK(row.g[0] == row.costs[0] - 0.5);
    CHECK(row.costs[0] == p.cost(r.theta_after(k)));
    best = std::max(best, quad_dual_value(p, Multiplier(row.lambda)));
  }
  best = std::max(best, quad_dual_value(p, Multiplier(r.final_lambda)));
  CHECK(*r.best_dual_value == best);
}

TEST_CASE("frozen dual recovers the unconstrained maximizer") {
  const QuadProgram p = QuadProgram::default_instance();
  SolverConfig cfg = testbed_config(ScheduleKind::InvLinExact, 200);
  cfg.zeta = 1e-12;
  const RunRecord r = apd_run(p, cfg);
  CHECK(r.final_lambda[0] < 1e-9);
  CHECK((r.final_theta - p.b()).norm() < 1e-6);
}

TEST_CASE("saddle-point start stays at the saddle point") {
  const QuadProgram p = QuadProgram::default_instance();
  const KktSolution kkt = quad_kkt_solve(p);
  SolverConfig cfg = testbed_config(ScheduleKind::InvQuaExact, 500);
  cfg.lambda0 = Vector::Constant(1, kkt.lambda);
  cfg.theta0 = kkt.theta;
  const RunRecord r = apd_run(p, cfg);
  for (const RunRow& row : r.rows) {
    CHECK(std::abs(row.lambda[0] - kkt.lambda) < 1e-9);
    CHECK((row.theta - kkt.theta).norm() < 1e-9);
  }
}

TEST_CASE("inner primal steps and the PID dual on the testbed") {
  const QuadProgram p = QuadProgram::default_instance();
  const KktSolution kkt = quad_kkt_solve(p);
  SolverConfig cfg = testbed_config(ScheduleKind::InvLinExact, 3000);
  cfg.inner_steps = 5;
  const RunRecord r = apd_run(p, cfg);
  CHECK(r.inner_steps == 5);
  CHECK(std::abs(r.final_lambda[0] - kkt.lambda) <= 1e-3);

  cfg.inner_steps = 1;
  cfg.dual = DualVariant::Pid;
  cfg.pid = PidGains{0.5, 0.5, 0.0};
  const RunRecord pid = apd_run(p, cfg);
  for (const RunRow& row : pid.rows) CHECK(row.lambda.minCoeff() >= 0.0);
  CHECK(std::abs(pid.final_lambda[0] - kkt.lambda) <= 1e-3);
}

TEST_CASE("APD configuration errors") {
  const QuadProgram p = QuadProgram::default_instance();
  SolverConfig cfg = testbed_config(ScheduleKind::InvLinExact, 10);
  SolverConfig bad = cfg;
  bad.iterations = 0;
  CHECK_THROWS_AS(apd_run(p, bad), std::invalid_argument);
  bad = cfg;
  bad.zeta = 0.0;
  CHECK_THROWS_AS(apd_run(p, bad), std::invalid_argument);
  bad = cfg;
  bad.theta0 = Vector::Zero(3);
  CHECK_THROWS_AS(apd_run(p, bad), std::invalid_argument);
  bad = cfg;
  bad.schedule.constants.l_costs = Vector::Ones(2);
  CHECK_THROWS_AS(apd_run(p, bad), std::invalid_argument);
}

TEST_CASE("PAPD without hazards: multiplier stays zero and return improves") {
  const Cmdp env = make_gridworld(open_grid());
  const auto pol = PolicyParams::uniform_tabular(16, 4);
  const RunRecord r = papd_run(env, pol, papd_config(300));
  CHECK(r.kind == RecordKind::Stochastic);
  CHECK(r.size() == 300);
  for (const RunRow& row : r.rows) {
    CHECK(row.lambda[0] == 0.0);
    CHECK(row.costs[0] == 0.0);
  }
  CHECK(r.final_lambda[0] == 0.0);
  // Smoothed return rises across consecutive windows.
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < 3; ++w) {
    const double m = mean_return(r, w * 100, (w + 1) * 100);
    CHECK(m > prev);
    prev = m;
  }
  const double exact_start = evaluate_tabular_policy(env, pol, 40).j_reward;
  const double exact_end = evaluate_tabular_policy(env, pol.with_theta(r.final_theta), 40).j_reward;
  CHECK(exact_end > exact_start + 0.1);
}

TEST_CASE("PAPD is deterministic for a fixed seed") {
  GridworldSpec g = open_grid();
  g.hazard_cells = {{1, 1}, {2, 2}};
  g.hazard_cost = 5.0;
  const Cmdp env = make_gridworld(g);
  const auto pol = PolicyParams::uniform_tabular(16, 4);
  SolverConfig cfg = papd_config(60);
  cfg.constraint.d = Vector::Constant(1, 0.5);
  cfg.schedule = LrSchedule::invlin_practical(0.05, 3);
  const RunRecord a = papd_run(env, pol, cfg);
  const RunRecord b = papd_run(env, pol, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.rows[k].theta == b.rows[k].theta);
    CHECK(a.rows[k].lambda == b.rows[k].lambda);
    CHECK(a.rows[k].reward == b.rows[k].reward);
    CHECK(a.rows[k].costs == b.rows[k].costs);
  }
  CHECK(a.final_theta == b.final_theta);

  cfg.seed = 43;
  CHECK(papd_run(env, pol, cfg).final_theta != a.final_theta);

  cfg.seed = 42;
  cfg.fresh_cost_batch = true;
  const RunRecord fresh = papd_run(env, pol, cfg);
  CHECK(fresh.rows[0].reward == a.rows[0].reward);
  CHECK(fresh.rows[0].theta == a.rows[0].theta);
}

TEST_CASE("PAPD with the PPOL surrogate on tabular and continuous tasks") {
  const Cmdp env = make_gridworld(open_grid());
  const auto pol = PolicyParams::uniform_tabular(16, 4);
  SolverConfig cfg = papd_config(80);
  cfg.estimator = PrimalEstimator::Ppol;
  cfg.ppol.minibatch = 64;
  cfg.ppol.epochs = 2;
  cfg.schedule = LrSchedule::constant(0.5);
  const RunRecord r = papd_run(env, pol, cfg);
  const double start = evaluate_tabular_policy(env, pol, 40).j_reward;
  const double end = evaluate_tabular_policy(env, pol.with_theta(r.final_theta), 40).j_reward;
  CHECK(end > start);

  PointEnvConfig pc;
  const Cmdp point = make_point_env(PointTask::Run, pc);
  SolverConfig pcfg = papd_config(5);
  pcfg.estimator = PrimalEstimator::Ppol;
  pcfg.schedule = LrSchedule::constant(0.01);
  pcfg.constraint.d = Vector::Constant(1, 5.0);
  const RunRecord pr = papd_run(point, PolicyParams::linear_gaussian(4, 2), pcfg);
  CHECK(pr.size() == 5);
  CHECK(pr.final_theta.allFinite());
}

TEST_CASE("PAPD configuration errors") {
  const Cmdp env = make_gridworld(open_grid());
  const auto pol = PolicyParams::uniform_tabular(16, 4);
  SolverConfig cfg = papd_config(5);
  SolverConfig bad = cfg;
  bad.dual = DualVariant::Ascent;
  CHECK_THROWS_AS(papd_run(env, pol, bad), std::invalid_argument);
  bad = cfg;
  bad.schedule = LrSchedule::invlin_exact(QuadProgram::default_instance().smoothness());
  CHECK_THROWS_AS(papd_run(env, pol, bad), std::invalid_argument);
  bad = cfg;
  bad.constraint.d = Vector::Zero(2);
  CHECK_THROWS_AS(papd_run(env, pol, bad), std::invalid_argument);
  bad = cfg;
  bad.sampling.n_traj = 0;
  CHECK_THROWS_AS(papd_run(env, pol, bad), std::invalid_argument);
  CHECK_THROWS_AS(papd_run(env, PolicyParams::uniform_tabular(15, 4), cfg), std::invalid_argument);
}

TEST_CASE("exact schedules differ on an anisotropic testbed and both reach the KKT point") {
  Matrix q = Matrix::Zero(2, 2);
  q.diagonal() << 1.0, 4.0;
  const QuadProgram p = quad_make(q, (Vector(2) << 2.0, 1.0).finished(), Matrix::Identity(2, 2),
                                  Vector::Zero(2), 0.3);
  const KktSolution kkt = quad_kkt_solve(p);
  SolverConfig cfg;
  cfg.iterations = 20000;
  cfg.zeta = 0.05;
  cfg.schedule = LrSchedule::invlin_exact(p.smoothness());
  const RunRecord lin = apd_run(p, cfg);
  cfg.schedule = LrSchedule::invqua_exact(p.smoothness());
  const RunRecord qua = apd_run(p, cfg);
  CHECK(qua.rows[0].lr < lin.rows[0].lr);
  for (const RunRecord* r : {&lin, &qua}) {
    CHECK(std::abs(r->final_lambda[0] - kkt.lambda) <= 1e-3);
    CHECK((r->final_theta - kkt.theta).norm() <= 1e-3);
  }
}
