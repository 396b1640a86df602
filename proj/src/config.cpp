#include "apd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace apd {

std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::Testbed: return "testbed";
    case TaskKind::Gridworld: return "gridworld";
    case TaskKind::PointRun: return "point-run";
    case TaskKind::PointCircle: return "point-circle";
  }
  return "?";
}

std::string_view to_string(AlgorithmKind a) {
  switch (a) {
    case AlgorithmKind::Apd: return "apd";
    case AlgorithmKind::PapdReinforce: return "papd-reinforce";
    case AlgorithmKind::PapdPpol: return "papd-ppol";
  }
  return "?";
}

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    std::ostringstream os;
    os << origin_;
    if (n.IsDefined() && n.Mark().line >= 0) os << ":" << n.Mark().line + 1;
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  // Rejects keys outside `allowed` so typos do not silently fall back to defaults.
  void check_keys(const YAML::Node& map, const std::set<std::string>& allowed,
                  const std::string& where) const {
    if (!map.IsMap()) fail(map, where + " must be a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
    }
  }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(n, "'" + key + "' has an invalid value '" + n.Scalar() + "'");
    }
  }

  template <class T>
  void opt(const YAML::Node& map, const std::string& key, T& out) const {
    if (const YAML::Node n = map[key]) out = scalar<T>(n, key);
  }

  std::size_t count(const YAML::Node& map, const std::string& key, std::size_t fallback) const {
    const YAML::Node n = map[key];
    if (!n) return fallback;
    const auto v = scalar<long long>(n, key);
    if (v < 0) fail(n, "'" + key + "' must be nonnegative");
    return static_cast<std::size_t>(v);
  }

  Vector vector(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) fail(n, "'" + key + "' must be a list of numbers");
    Vector v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) v[static_cast<Eigen::Index>(i)] = scalar<double>(n[i], key);
    return v;
  }

  Matrix matrix(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence() || n.size() == 0) fail(n, "'" + key + "' must be a list of rows");
    const std::size_t rows = n.size();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n[0].size()));
    for (std::size_t r = 0; r < rows; ++r) {
      const Vector row = vector(n[r], key);
      if (row.size() != m.cols()) fail(n[r], "'" + key + "' rows differ in length");
      m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
  }

  Cell cell(const YAML::Node& n, const std::string& key) const {
    const Vector v = vector(n, key);
    if (v.size() != 2) fail(n, "'" + key + "' must be [x, y]");
    return Cell{static_cast<int>(v[0]), static_cast<int>(v[1])};
  }

  // Wraps semantic validation errors with the node's line.
  template <class F>
  void checked(const YAML::Node& n, F&& f) const {
    try {
      f();
    } catch (const std::invalid_argument& e) {
      fail(n, e.what());
    }
  }

 private:
  std::string origin_;
};

TaskKind task_from_string(const std::string& s) {
  for (TaskKind t : {TaskKind::Testbed, TaskKind::Gridworld, TaskKind::PointRun, TaskKind::PointCircle})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown task '" + s + "' (testbed, gridworld, point-run, point-circle)");
}

AlgorithmKind algorithm_from_string(const std::string& s) {
  for (AlgorithmKind a : {AlgorithmKind::Apd, AlgorithmKind::PapdReinforce, AlgorithmKind::PapdPpol})
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown algorithm '" + s + "' (apd, papd-reinforce, papd-ppol)");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  Reader rd(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError(origin + ": top level must be a mapping");
  rd.check_keys(root,
                {"schema_version", "task", "algorithm", "iterations", "seeds", "workers",
                 "output_dir", "cost_limit", "discount", "final_window", "schedule", "dual",
                 "sampling", "inner_steps", "ppol", "testbed", "gridworld", "point_env"},
                "top level");

  ExperimentConfig cfg;
  if (!root["schema_version"]) rd.fail(root, "missing 'schema_version'");
  cfg.schema_version = rd.scalar<int>(root["schema_version"], "schema_version");
  if (cfg.schema_version != kSchemaVersion)
    rd.fail(root["schema_version"], "unsupported schema_version " + std::to_string(cfg.schema_version));

  if (!root["task"]) rd.fail(root, "missing 'task'");
  rd.checked(root["task"], [&] { cfg.task = task_from_string(rd.scalar<std::string>(root["task"], "task")); });
  if (const auto n = root["algorithm"])
    rd.checked(n, [&] { cfg.algorithm = algorithm_from_string(rd.scalar<std::string>(n, "algorithm")); });
  else
    cfg.algorithm = cfg.task == TaskKind::Testbed ? AlgorithmKind::Apd : AlgorithmKind::PapdReinforce;
  const bool exact = cfg.algorithm == AlgorithmKind::Apd;

  SolverConfig& s = cfg.solver;
  s.iterations = rd.count(root, "iterations", exact ? 10000 : 500);
  s.inner_steps = rd.count(root, "inner_steps", 1);
  cfg.workers = rd.count(root, "workers", 1);
  rd.opt(root, "output_dir", cfg.output_dir);
  cfg.cost_limit = cfg.task == TaskKind::Testbed ? 0.5 : 10.0;
  rd.opt(root, "cost_limit", cfg.cost_limit);
  rd.opt(root, "discount", cfg.discount);
  if (root["discount"] && !(cfg.discount > 0.0 && cfg.discount < 1.0))
    rd.fail(root["discount"], "discount must lie in (0, 1)");
  rd.opt(root, "final_window", cfg.final_window);
  if (root["final_window"] && !(cfg.final_window > 0.0 && cfg.final_window <= 1.0))
    rd.fail(root["final_window"], "final_window must lie in (0, 1]");

  if (const auto n = root["seeds"]) {
    if (!n.IsSequence()) rd.fail(n, "'seeds' must be a list");
    cfg.seeds.clear();
    for (const auto& e : n) cfg.seeds.push_back(rd.scalar<std::uint64_t>(e, "seeds"));
    if (cfg.seeds.empty()) rd.fail(n, "at least one seed is required");
  }

  // Schedule.
  s.schedule = LrSchedule::invlin_practical(0.001, 3.0);
  if (exact) s.schedule.kind = ScheduleKind::InvLinExact;
  if (const auto n = root["schedule"]) {
    rd.check_keys(n, {"variant", "lr", "h1", "h2", "sum_multipliers"}, "schedule");
    if (const auto v = n["variant"])
      rd.checked(v, [&] { s.schedule.kind = schedule_kind_from_string(rd.scalar<std::string>(v, "variant")); });
    if (s.schedule.kind == ScheduleKind::InvLinPractical) {
      s.schedule.h1 = 0.001;
      s.schedule.h2 = 3.0;
    } else if (s.schedule.kind == ScheduleKind::InvQuaPractical) {
      s.schedule.h1 = 0.015;
      s.schedule.h2 = 6.0;
    }
    rd.opt(n, "lr", s.schedule.lr);
    rd.opt(n, "h1", s.schedule.h1);
    rd.opt(n, "h2", s.schedule.h2);
    rd.opt(n, "sum_multipliers", s.schedule.sum_multipliers);
  }

  // Dual update.
  s.dual = exact ? DualVariant::Ascent : DualVariant::Pid;
  if (const auto n = root["dual"]) {
    rd.check_keys(n, {"variant", "zeta", "lambda0", "kp", "ki", "kd"}, "dual");
    if (const auto v = n["variant"]) {
      const auto name = rd.scalar<std::string>(v, "variant");
      if (name == "ascent") s.dual = DualVariant::Ascent;
      else if (name == "pid") s.dual = DualVariant::Pid;
      else rd.fail(v, "unknown dual variant '" + name + "' (ascent, pid)");
    }
    rd.opt(n, "zeta", s.zeta);
    if (n["zeta"] && !(s.zeta > 0.0)) rd.fail(n["zeta"], "dual.zeta must be positive");
    if (const auto l = n["lambda0"]) s.lambda0 = rd.vector(l, "lambda0");
    rd.opt(n, "kp", s.pid.kp);
    rd.opt(n, "ki", s.pid.ki);
    rd.opt(n, "kd", s.pid.kd);
  }

  if (const auto n = root["sampling"]) {
    rd.check_keys(n, {"n_traj", "horizon", "fresh_cost_batch"}, "sampling");
    s.sampling.n_traj = rd.count(n, "n_traj", s.sampling.n_traj);
    s.sampling.horizon = rd.count(n, "horizon", s.sampling.horizon);
    rd.opt(n, "fresh_cost_batch", s.fresh_cost_batch);
  }
  s.estimator = cfg.algorithm == AlgorithmKind::PapdPpol ? PrimalEstimator::Ppol : PrimalEstimator::Reinforce;

  if (const auto n = root["ppol"]) {
    rd.check_keys(n, {"clip_ratio", "gae_lambda", "epochs", "minibatch"}, "ppol");
    rd.opt(n, "clip_ratio", s.ppol.clip_ratio);
    rd.opt(n, "gae_lambda", s.ppol.gae_lambda);
    s.ppol.epochs = rd.count(n, "epochs", s.ppol.epochs);
    s.ppol.minibatch = rd.count(n, "minibatch", s.ppol.minibatch);
  }

  if (const auto n = root["testbed"]) {
    rd.check_keys(n, {"Q", "b", "P", "c", "theta0"}, "testbed");
    if (n["Q"]) cfg.testbed.q = rd.matrix(n["Q"], "Q");
    if (n["b"]) cfg.testbed.b = rd.vector(n["b"], "b");
    if (n["P"]) cfg.testbed.p = rd.matrix(n["P"], "P");
    if (n["c"]) cfg.testbed.c = rd.vector(n["c"], "c");
    if (n["theta0"]) cfg.testbed.theta0 = rd.vector(n["theta0"], "theta0");
    rd.checked(n, [&] { make_testbed(cfg); });
  }

  if (const auto n = root["gridworld"]) {
    rd.check_keys(n, {"width", "height", "hazards", "goal", "start", "step_reward", "goal_reward",
                      "hazard_cost", "slip_prob"},
                  "gridworld");
    GridworldSpec& g = cfg.gridworld;
    rd.opt(n, "width", g.width);
    rd.opt(n, "height", g.height);
    if (const auto h = n["hazards"]) {
      if (!h.IsSequence()) rd.fail(h, "'hazards' must be a list of [x, y] cells");
      for (const auto& c : h) g.hazard_cells.push_back(rd.cell(c, "hazards"));
    }
    if (n["goal"]) g.goal_cell = rd.cell(n["goal"], "goal");
    if (n["start"]) g.start_cell = rd.cell(n["start"], "start");
    rd.opt(n, "step_reward", g.step_reward);
    rd.opt(n, "goal_reward", g.goal_reward);
    rd.opt(n, "hazard_cost", g.hazard_cost);
    rd.opt(n, "slip_prob", g.slip_prob);
    g.gamma = cfg.discount;
    rd.checked(n, [&] { g.validate(); });
  }

  if (const auto n = root["point_env"]) {
    rd.check_keys(n, {"goal", "y_lim", "v_lim", "circle_radius", "x_lim", "dt", "action_scale",
                      "noise_std", "init_log_std"},
                  "point_env");
    PointEnvConfig& p = cfg.point;
    if (n["goal"]) {
      const Vector g = rd.vector(n["goal"], "goal");
      if (g.size() != 2) rd.fail(n["goal"], "'goal' must be [x, y]");
      p.goal = g;
    }
    rd.opt(n, "y_lim", p.y_lim);
    rd.opt(n, "v_lim", p.v_lim);
    rd.opt(n, "circle_radius", p.circle_radius);
    rd.opt(n, "x_lim", p.x_lim);
    rd.opt(n, "dt", p.dt);
    rd.opt(n, "action_scale", p.action_scale);
    rd.opt(n, "noise_std", p.noise_std);
    rd.opt(n, "init_log_std", cfg.init_log_std);
  }
  cfg.gridworld.gamma = cfg.discount;
  cfg.point.gamma = cfg.discount;

  rd.checked(root, [&] { validate_config(cfg); });
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (cfg.workers == 0) throw std::invalid_argument("workers must be >= 1");
  if (cfg.solver.iterations == 0) throw std::invalid_argument("iterations must be >= 1");
  if (!(cfg.discount > 0.0 && cfg.discount < 1.0))
    throw std::invalid_argument("discount must lie in (0, 1)");
  if (!(cfg.final_window > 0.0 && cfg.final_window <= 1.0))
    throw std::invalid_argument("final_window must lie in (0, 1]");
  if (!std::isfinite(cfg.cost_limit)) throw std::invalid_argument("cost_limit must be finite");

  const bool testbed = cfg.task == TaskKind::Testbed;
  const bool exact = cfg.algorithm == AlgorithmKind::Apd;
  if (testbed != exact)
    throw std::invalid_argument("algorithm 'apd' runs on the testbed; sampled tasks need papd-reinforce or papd-ppol");
  const SolverConfig& s = cfg.solver;
  if (!s.schedule.is_exact()) s.schedule.validate();
  if (!exact && s.schedule.is_exact())
    throw std::invalid_argument("exact schedules need the testbed's smoothness constants");
  if (!exact && s.dual != DualVariant::Pid)
    throw std::invalid_argument("papd uses the pid dual update");
  if (s.dual == DualVariant::Ascent && !(s.zeta > 0.0))
    throw std::invalid_argument("dual.zeta must be positive");
  if (s.dual == DualVariant::Pid) s.pid.validate();
  if (s.inner_steps == 0) throw std::invalid_argument("inner_steps must be >= 1");
  if (!exact && (s.sampling.n_traj == 0 || s.sampling.horizon == 0))
    throw std::invalid_argument("sampling needs n_traj >= 1 and horizon >= 1");
  if (cfg.algorithm == AlgorithmKind::PapdPpol) s.ppol.validate();
  if (s.lambda0.size() > 1 || (s.lambda0.size() == 1 && s.lambda0[0] < 0.0))
    throw std::invalid_argument("dual.lambda0 must hold one nonnegative value");
  if (cfg.task == TaskKind::Gridworld) cfg.gridworld.validate();
  if (cfg.task == TaskKind::PointRun || cfg.task == TaskKind::PointCircle) cfg.point.validate();
  if (testbed) {
    const QuadProgram prog = make_testbed(cfg);
    if (cfg.testbed.theta0.size() != 0 &&
        static_cast<std::size_t>(cfg.testbed.theta0.size()) != prog.dimension())
      throw std::invalid_argument("testbed.theta0 dimension does not match b");
  }
}

QuadProgram make_testbed(const ExperimentConfig& cfg) {
  return quad_make(cfg.testbed.q, cfg.testbed.b, cfg.testbed.p, cfg.testbed.c, cfg.cost_limit);
}

Cmdp make_task_env(const ExperimentConfig& cfg) {
  switch (cfg.task) {
    case TaskKind::Gridworld: return make_gridworld(cfg.gridworld);
    case TaskKind::PointRun: return make_point_env(PointTask::Run, cfg.point);
    case TaskKind::PointCircle: return make_point_env(PointTask::Circle, cfg.point);
    case TaskKind::Testbed: break;
  }
  throw std::invalid_argument("the testbed is not a sampled environment");
}

PolicyParams initial_policy(const ExperimentConfig& cfg) {
  if (cfg.task == TaskKind::Gridworld) {
    const auto n = static_cast<std::size_t>(cfg.gridworld.width * cfg.gridworld.height);
    return PolicyParams::uniform_tabular(n, 4);
  }
  return PolicyParams::linear_gaussian(4, 2, cfg.init_log_std);
}

SolverConfig resolved_solver(const ExperimentConfig& cfg, std::uint64_t seed) {
  SolverConfig s = cfg.solver;
  s.seed = seed;
  s.constraint.d = Vector::Constant(1, cfg.cost_limit);
  if (cfg.task == TaskKind::Testbed) {
    const QuadProgram prog = make_testbed(cfg);
    s.schedule.constants = prog.smoothness();
    s.theta0 = cfg.testbed.theta0;
  }
  return s;
}

}  // namespace apd
