#include "apd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "apd/envs.hpp"

namespace apd {

namespace {

using DualFn = std::function<double(const Multiplier&)>;

Multiplier initial_multiplier(const SolverConfig& cfg, std::size_t m) {
  if (cfg.lambda0.size() == 0) return Multiplier::zeros(m);
  if (static_cast<std::size_t>(cfg.lambda0.size()) != m)
    throw std::invalid_argument("solver: lambda0 dimension does not match the constraints");
  return Multiplier(cfg.lambda0);
}

void check_schedule(const SolverConfig& cfg, std::size_t m) {
  cfg.schedule.validate();
  if (cfg.schedule.is_exact() &&
      static_cast<std::size_t>(cfg.schedule.constants.l_costs.size()) != m)
    throw std::invalid_argument("solver: schedule constants do not match the constraint count");
}

RunRecord apd_loop(const ConstrainedProgram& problem, const SolverConfig& cfg,
                   const DualFn& dual_fn) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.iterations == 0)
    throw std::invalid_argument("apd_run: iterations must be >= 1");
  if (cfg.inner_steps == 0)
    throw std::invalid_argument("apd_run: inner_steps must be >= 1");
  const std::size_t m = problem.constraint_count();
  check_schedule(cfg, m);
  if (cfg.dual == DualVariant::Ascent && !(cfg.zeta > 0.0))
    throw std::invalid_argument("apd_run: zeta must be positive");
  if (cfg.dual == DualVariant::Pid) cfg.pid.validate();

  Vector theta = cfg.theta0.size() ? cfg.theta0
                                   : Vector(Vector::Zero(static_cast<Eigen::Index>(problem.dimension())));
  if (static_cast<std::size_t>(theta.size()) != problem.dimension())
    throw std::invalid_argument("apd_run: theta0 dimension does not match the problem");
  Multiplier lm = initial_multiplier(cfg, m);
  PidState pid = PidState::zeros(m);
  const ConstraintSpec& spec = problem.constraint();

  RunRecord rec;
  rec.kind = RecordKind::Exact;
  rec.dual = cfg.dual;
  rec.schedule = cfg.schedule.kind;
  rec.zeta = cfg.zeta;
  rec.inner_steps = cfg.inner_steps;
  rec.rows.reserve(cfg.iterations);

  auto track_best = [&](const Multiplier& l) {
    if (!dual_fn) return;
    const double v = dual_fn(l);
    if (!rec.best_dual_value || v > *rec.best_dual_value) {
      rec.best_dual_value = v;
      rec.lambda_best = l.values();
    }
  };

  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    track_best(lm);
    RunRow row;
    row.step = k;
    row.theta = theta;
    row.lambda = lm.values();
    row.lr = learning_rate(cfg.schedule, lm);

    for (std::size_t inner = 0; inner < cfg.inner_steps; ++inner)
      theta -= row.lr * problem.lagrangian_grad(theta, lm);

    row.reward = problem.reward(theta);
    row.costs = problem.costs(theta);
    row.g = constraint_value(row.costs, spec);
    if (cfg.dual == DualVariant::Ascent) {
      lm = dual_ascent_step(lm, cfg.zeta, row.g);
    } else {
      auto [next, state] = pid_dual_step(pid, cfg.pid, row.costs, spec);
      lm = std::move(next);
      pid = std::move(state);
    }
    rec.rows.push_back(std::move(row));
  }
  track_best(lm);
  rec.final_theta = theta;
  rec.final_lambda = lm.values();
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// Quadratic features [1, x, x*x] for the continuous-state value baseline.
Vector value_features(const Vector& x) {
  Vector phi(1 + 2 * x.size());
  phi[0] = 1.0;
  phi.segment(1, x.size()) = x;
  phi.tail(x.size()) = x.cwiseProduct(x);
  return phi;
}

/// Per-step values V(s_0..s_T) for reward (column 0) and each cost.
struct ValueTable {
  std::vector<Eigen::MatrixXd> per_traj;  // (T+1) x (1 + m)
};

ValueTable tabular_values(const Cmdp& cmdp, const PolicyParams& params,
                          const std::vector<Trajectory>& batch) {
  const TabularValues tv = evaluate_tabular_policy(cmdp, params, 0);
  const auto m = static_cast<Eigen::Index>(cmdp.cost_count());
  ValueTable out;
  for (const Trajectory& tr : batch) {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(tr.length()) + 1, 1 + m);
    auto fill = [&](Eigen::Index t, const State& s) {
      const auto idx = static_cast<Eigen::Index>(std::get<std::size_t>(s));
      v(t, 0) = tv.v_reward[idx];
      v.row(t).tail(m) = tv.v_costs.row(idx);
    };
    for (std::size_t t = 0; t < tr.length(); ++t)
      fill(static_cast<Eigen::Index>(t), tr.steps[t].state);
    fill(static_cast<Eigen::Index>(tr.length()), tr.final_state);
    out.per_traj.push_back(std::move(v));
  }
  return out;
}

ValueTable fitted_values(const Cmdp& cmdp, const std::vector<Trajectory>& batch) {
  const auto m = static_cast<Eigen::Index>(cmdp.cost_count());
  const double gamma = cmdp.gamma();
  std::size_t rows = 0;
  for (const Trajectory& tr : batch) rows += tr.length();
  const auto dim = static_cast<Eigen::Index>(1 + 2 * cmdp.state_size());

  Eigen::MatrixXd features(static_cast<Eigen::Index>(rows), dim);
  Eigen::MatrixXd targets(static_cast<Eigen::Index>(rows), 1 + m);
  Eigen::Index r = 0;
  for (const Trajectory& tr : batch) {
    Vector acc = Vector::Zero(1 + m);
    const Eigen::Index base = r;
    for (std::size_t t = tr.length(); t-- > 0;) {
      const Step& st = tr.steps[t];
      Vector signal(1 + m);
      signal[0] = st.reward;
      signal.tail(m) = st.cost;
      acc = signal + gamma * acc;
      features.row(base + static_cast<Eigen::Index>(t)) =
          value_features(std::get<Vector>(st.state)).transpose();
      targets.row(base + static_cast<Eigen::Index>(t)) = acc.transpose();
    }
    r += static_cast<Eigen::Index>(tr.length());
  }
  const Eigen::MatrixXd gram =
      features.transpose() * features + 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd weights = gram.ldlt().solve(features.transpose() * targets);

  ValueTable out;
  for (const Trajectory& tr : batch) {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(tr.length()) + 1, 1 + m);
    for (std::size_t t = 0; t < tr.length(); ++t)
      v.row(static_cast<Eigen::Index>(t)) =
          value_features(std::get<Vector>(tr.steps[t].state)).transpose() * weights;
    v.row(static_cast<Eigen::Index>(tr.length())) =
        value_features(std::get<Vector>(tr.final_state)).transpose() * weights;
    out.per_traj.push_back(std::move(v));
  }
  return out;
}

AdvantageBatch build_advantages(const Cmdp& cmdp, const PolicyParams& params,
                                const std::vector<Trajectory>& batch,
                                double gae_lambda) {
  const ValueTable values = cmdp.tabular() ? tabular_values(cmdp, params, batch)
                                           : fitted_values(cmdp, batch);
  const auto m = static_cast<Eigen::Index>(cmdp.cost_count());
  const double gamma = cmdp.gamma();
  AdvantageBatch out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Trajectory& tr = batch[i];
    const Eigen::MatrixXd& v = values.per_traj[i];
    std::vector<std::vector<double>> adv(static_cast<std::size_t>(1 + m));
    for (Eigen::Index j = 0; j < 1 + m; ++j) {
      std::vector<double> signal(tr.length());
      for (std::size_t t = 0; t < tr.length(); ++t)
        signal[t] = j == 0 ? tr.steps[t].reward : tr.steps[t].cost[j - 1];
      const Vector col = v.col(j);
      adv[static_cast<std::size_t>(j)] = gae_advantages(
          signal, std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
          gamma, gae_lambda);
    }
    for (std::size_t t = 0; t < tr.length(); ++t) {
      AdvantageSample s;
      s.state = tr.steps[t].state;
      s.action = tr.steps[t].action;
      s.log_prob_old = policy_log_prob(params, s.state, s.action);
      s.adv_reward = adv[0][t];
      s.adv_cost.resize(m);
      for (Eigen::Index j = 0; j < m; ++j)
        s.adv_cost[j] = adv[static_cast<std::size_t>(j + 1)][t];
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

Vector ppol_update(const Cmdp& cmdp, const PolicyParams& params,
                   const std::vector<Trajectory>& batch, const Multiplier& lm,
                   double lr, const SolverConfig& cfg, std::uint64_t seed) {
  const AdvantageBatch full = build_advantages(cmdp, params, batch, cfg.ppol.gae_lambda);
  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  PolicyParams current = params;
  for (std::size_t epoch = 0; epoch < cfg.ppol.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.ppol.minibatch) {
      const std::size_t end = std::min(order.size(), begin + cfg.ppol.minibatch);
      AdvantageBatch mb;
      mb.samples.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) mb.samples.push_back(full.samples[order[i]]);
      // Gradient ascent on the surrogate is descent on the Lagrangian loss.
      Vector next = current.theta() + lr * ppol_surrogate_grad(mb, current, lm, cfg.ppol);
      current = current.with_theta(std::move(next));
    }
  }
  return current.theta();
}

}  // namespace

RunRecord apd_run(const ConstrainedProgram& problem, const SolverConfig& cfg) {
  return apd_loop(problem, cfg, nullptr);
}

RunRecord apd_run(const QuadProgram& problem, const SolverConfig& cfg) {
  return apd_loop(problem, cfg, [&problem](const Multiplier& l) {
    return quad_dual_value(problem, l);
  });
}

RunRecord papd_run(const Cmdp& cmdp, const PolicyParams& initial,
                   const SolverConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.iterations == 0)
    throw std::invalid_argument("papd_run: iterations must be >= 1");
  if (cfg.dual != DualVariant::Pid)
    throw std::invalid_argument("papd_run: the PID-Lagrangian dual update is required");
  if (cfg.schedule.is_exact())
    throw std::invalid_argument("papd_run: exact schedules need smoothness constants a sampled CMDP cannot provide");
  const std::size_t m = cmdp.cost_count();
  if (cfg.constraint.size() != m)
    throw std::invalid_argument("papd_run: cost limits do not match the environment's cost count");
  if (cfg.schedule.is_practical() && m != 1 && !cfg.schedule.sum_multipliers)
    throw std::invalid_argument("papd_run: practical schedules need a single constraint");
  if (cfg.sampling.n_traj == 0 || cfg.sampling.horizon == 0)
    throw std::invalid_argument("papd_run: sampling needs n_traj >= 1 and horizon >= 1");
  cfg.schedule.validate();
  cfg.pid.validate();
  if (cfg.estimator == PrimalEstimator::Ppol) {
    cfg.ppol.validate();
    if (m != 1) throw std::invalid_argument("papd_run: PPOL supports a single constraint");
  }
  check_compatible(cmdp, initial);

  PolicyParams params = cfg.theta0.size() ? initial.with_theta(cfg.theta0) : initial;
  Multiplier lm = initial_multiplier(cfg, m);
  PidState pid = PidState::zeros(m);

  RunRecord rec;
  rec.kind = RecordKind::Stochastic;
  rec.dual = cfg.dual;
  rec.schedule = cfg.schedule.kind;
  rec.rows.reserve(cfg.iterations);

  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    const std::uint64_t batch_seed = derive_seed(cfg.seed, 2 * k);
    const auto batch = sample_batch(cmdp, params, cfg.sampling.n_traj,
                                    cfg.sampling.horizon, batch_seed);
    RunRow row;
    row.step = k;
    row.theta = params.theta();
    row.lambda = lm.values();
    row.lr = learning_rate(cfg.schedule, lm);

    ObjectiveEstimate est;
    Vector next_theta;
    if (cfg.estimator == PrimalEstimator::Reinforce) {
      GradientEstimate ge = reinforce_grad(batch, cmdp.gamma(), params, lm, cfg.constraint);
      next_theta = params.theta() - row.lr * ge.grad;
      est = std::move(ge.objectives);
    } else {
      est = summarize_batch(batch, cmdp.gamma(), m);
      next_theta = ppol_update(cmdp, params, batch, lm, row.lr, cfg, derive_seed(batch_seed, 0));
    }
    params = params.with_theta(std::move(next_theta));

    Vector dual_costs = est.costs;
    if (cfg.fresh_cost_batch)
      dual_costs = estimate_objectives(cmdp, params, cfg.sampling.n_traj,
                                       cfg.sampling.horizon, derive_seed(cfg.seed, 2 * k + 1))
                       .costs;
    row.reward = est.reward;
    row.costs = dual_costs;
    row.g = constraint_value(dual_costs, cfg.constraint);

    auto [next_lm, next_pid] = pid_dual_step(pid, cfg.pid, dual_costs, cfg.constraint);
    lm = std::move(next_lm);
    pid = std::move(next_pid);
    rec.rows.push_back(std::move(row));
  }
  rec.final_theta = params.theta();
  rec.final_lambda = lm.values();
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace apd
