#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "apd/config.hpp"
#include "apd/harness.hpp"
#include "apd/record_io.hpp"

using namespace apd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("apd_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTestbedYaml = R"(schema_version: 1
task: testbed
algorithm: apd
iterations: 400
seeds: [0, 1]
workers: 2
cost_limit: 0.5
schedule:
  variant: invqua-exact
dual:
  variant: ascent
  zeta: 0.05
)";

const char* kGridYaml = R"(schema_version: 1
task: gridworld
algorithm: papd-reinforce
iterations: 30
seeds: [3, 4]
workers: 2
cost_limit: 0.5
schedule:
  variant: invlin-practical
  h1: 0.05
  h2: 3
dual:
  variant: pid
sampling:
  n_traj: 4
  horizon: 30
gridworld:
  width: 3
  height: 3
  goal: [2, 2]
  hazards: [[1, 1]]
  hazard_cost: 2
)";

RunRecord toy_record(std::initializer_list<double> returns, double lambda = 0.0) {
  RunRecord r;
  std::size_t k = 0;
  for (double v : returns) {
    RunRow row;
    row.step = k++;
    row.reward = v;
    row.costs = Vector::Constant(1, 2.0 * v);
    row.lr = 0.1;
    row.lambda = Vector::Constant(1, lambda);
    r.rows.push_back(row);
  }
  return r;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(APD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing: defaults and explicit values") {
  const ExperimentConfig cfg = parse_config(kTestbedYaml);
  CHECK(cfg.task == TaskKind::Testbed);
  CHECK(cfg.algorithm == AlgorithmKind::Apd);
  CHECK(cfg.solver.iterations == 400);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(cfg.solver.schedule.kind == ScheduleKind::InvQuaExact);
  CHECK(cfg.cost_limit == 0.5);
  CHECK(cfg.final_window == 0.2);

  const ExperimentConfig grid = parse_config(kGridYaml);
  CHECK(grid.algorithm == AlgorithmKind::PapdReinforce);
  CHECK(grid.solver.dual == DualVariant::Pid);
  CHECK(grid.solver.schedule.h1 == 0.05);
  CHECK(grid.gridworld.hazard_cells.size() == 1);
  CHECK(grid.solver.sampling.n_traj == 4);

  const SolverConfig s = resolved_solver(cfg, 7);
  CHECK(s.seed == 7);
  CHECK(s.constraint.d[0] == 0.5);
  CHECK(s.schedule.constants.mu == doctest::Approx(1.0));
}

TEST_CASE("shipped configs load") {
  for (const auto& entry : fs::directory_iterator(APD_CONFIG_DIR)) {
    INFO(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
  }
}

TEST_CASE("config errors carry line numbers") {
  auto message = [](const std::string& text) -> std::string {
    try {
      parse_config(text, "x.yaml");
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("schema_version: 1\ntask: testbed\nbogus: 3\n").rfind("x.yaml:3:", 0) == 0);
  CHECK(message("schema_version: 1\ntask: testbed\ndual:\n  zeta: -1\n").find("x.yaml:4") == 0);
  CHECK(message("schema_version: 2\ntask: testbed\n").find("x.yaml:1") == 0);
  CHECK_FALSE(message("task: testbed\n").empty());
  CHECK_FALSE(message("schema_version: 1\ntask: testbed\nseeds: []\n").empty());
  CHECK_FALSE(message("schema_version: 1\ntask: testbed\niterations: many\n").empty());
  CHECK_FALSE(message("schema_version: 1\ntask: gridworld\nalgorithm: apd\n").empty());
  CHECK_FALSE(message("schema_version: 1\ntask: gridworld\nalgorithm: papd-reinforce\ndual:\n  variant: ascent\n").empty());
  CHECK_FALSE(message("schema_version: 1\ntask: gridworld\nalgorithm: papd-reinforce\nschedule:\n  variant: invlin-exact\n").empty());
  CHECK_FALSE(message("schema_version: 1\ntask: [unclosed\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST_CASE("record CSV round-trips exactly") {
  RunRecord r = toy_record({0.1, 1.0 / 3.0, -2.5e-300, 1e300});
  r.rows[1].lr = 0.1 + 0.2;
  r.rows[2].lambda[0] = std::nextafter(1.0, 2.0);
  const std::string text = record_csv(r);
  CHECK(text.rfind("step,return,cost,lr,lambda\n", 0) == 0);
  const RunRecord back = parse_record_csv(text);
  REQUIRE(back.size() == r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    CHECK(back.rows[k].step == k);
    CHECK(back.rows[k].reward == r.rows[k].reward);
    CHECK(back.rows[k].costs == r.rows[k].costs);
    CHECK(back.rows[k].lr == r.rows[k].lr);
    CHECK(back.rows[k].lambda == r.rows[k].lambda);
  }
  CHECK(record_csv(back) == text);
}

TEST_CASE("record CSV with several constraints and malformed input") {
  RunRecord r = toy_record({1.0, 2.0});
  for (auto& row : r.rows) {
    row.costs = Vector::Constant(2, row.reward);
    row.lambda = Vector::Zero(2);
  }
  const std::string text = record_csv(r);
  CHECK(text.rfind("step,return,cost_1,cost_2,lr,lambda_1,lambda_2\n", 0) == 0);
  CHECK(record_csv(parse_record_csv(text)) == text);

  auto message = [](const std::string& t) -> std::string {
    try {
      parse_record_csv(t);
    } catch (const std::runtime_error& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("step,return,cost,lr,lambda\n0,1,2,3,4\n1,1,oops,3,4\n").rfind("line 3:", 0) == 0);
  CHECK(message("step,return,cost,lr,lambda\n0,1,2,3\n").rfind("line 2:", 0) == 0);
  CHECK(message("a,b,c\n").rfind("line 1:", 0) == 0);
  CHECK(message("").rfind("line 1:", 0) == 0);
}

TEST_CASE("trace attaches iterates to a parsed record") {
  const QuadProgram p = QuadProgram::default_instance();
  SolverConfig cfg;
  cfg.iterations = 50;
  cfg.schedule = LrSchedule::invlin_exact(p.smoothness());
  const RunRecord r = apd_run(p, cfg);
  RunRecord back = parse_record_csv(record_csv(r));
  attach_trace(back, trace_csv(r), p.constraint().d);
  CHECK(back.final_theta == r.final_theta);
  CHECK(back.final_lambda == r.final_lambda);
  for (std::size_t k = 0; k < r.size(); ++k) {
    CHECK(back.rows[k].theta == r.rows[k].theta);
    CHECK(back.rows[k].g == r.rows[k].g);
  }
  RunRecord shorter = parse_record_csv(record_csv(r));
  shorter.rows.pop_back();
  CHECK_THROWS_AS(attach_trace(shorter, trace_csv(r), p.constraint().d), std::runtime_error);
}

TEST_CASE("seed aggregation") {
  const auto a = aggregate_seeds({toy_record({1, 5}), toy_record({1, 5})});
  CHECK(a.size() == 2);
  CHECK(a.ret.mean == a.ret.min);
  CHECK(a.ret.mean == a.ret.max);

  const auto b = aggregate_seeds({toy_record({1, 0, 4}), toy_record({3, 0, 2})});
  CHECK(b.size() == 3);
  CHECK(b.ret.mean[0] == 2.0);
  CHECK(b.ret.min[0] == 1.0);
  CHECK(b.ret.max[0] == 3.0);
  CHECK(b.cost.mean[2] == 6.0);
  for (std::size_t k = 0; k < b.size(); ++k) {
    CHECK(b.ret.min[k] <= b.ret.mean[k]);
    CHECK(b.ret.mean[k] <= b.ret.max[k]);
  }
  CHECK_THROWS_AS(aggregate_seeds({toy_record({1, 2}), toy_record({1})}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate_seeds({}), std::invalid_argument);
  const std::string csv = curves_csv(b);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("final-window statistics") {
  const RunRecord r = toy_record({0, 0, 0, 0, 0, 0, 0, 0, 2, 4});
  const WindowMeans w = final_window(r, 0.2);
  CHECK(w.ret == 3.0);
  CHECK(w.cost == 6.0);
  const WindowSummary s = summarize_windows({r, toy_record({0, 0, 0, 0, 0, 0, 0, 0, 4, 6})}, 0.2);
  CHECK(s.return_mean == 4.0);
  CHECK(s.return_std == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(final_window(r, 0.0), std::invalid_argument);
}

TEST_CASE("grid parsing") {
  const GridSpec f = parse_grid("h1*0.2,0.4,1,2");
  CHECK(f.parameter == "h1");
  CHECK(f.factors);
  CHECK(f.values == std::vector<double>{0.2, 0.4, 1, 2});
  const GridSpec v = parse_grid("lr = 1e-4, 5e-4");
  CHECK(v.parameter == "lr");
  CHECK_FALSE(v.factors);
  CHECK(v.values == std::vector<double>{1e-4, 5e-4});
  CHECK_THROWS_AS(parse_grid("mu*2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("h1*"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("h1*1,,2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("h2=-1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("h2=abc"), std::invalid_argument);
}

TEST_CASE("sweeps produce one row per grid value") {
  ExperimentConfig cfg = parse_config(kGridYaml);
  cfg.solver.iterations = 10;
  const auto rows = sweep(cfg, parse_grid("h1*0.2,0.4,0.6,0.8,1,1.2,1.6,2"), {});
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].value == doctest::Approx(0.01));
  CHECK(rows[7].setting == 2.0);
  const auto h2 = sweep(cfg, parse_grid("h2=1,2,3,4,5"), {});
  CHECK(h2.size() == 5);
  const std::string table = sweep_csv(h2);
  CHECK(table.rfind("parameter,setting,value,return_mean,return_std,cost_mean,cost_std\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 6);
  CHECK_THROWS_AS(sweep(cfg, parse_grid("lr=0.1"), {}), std::invalid_argument);

  // A single-cell sweep at factor 1 reproduces the plain run.
  const fs::path dir = scratch("sweep");
  sweep(cfg, parse_grid("h1*1"), dir);
  const fs::path plain = scratch("plain");
  run_config(cfg, plain);
  for (std::uint64_t seed : cfg.seeds) {
    const std::string name = "record_seed" + std::to_string(seed) + ".csv";
    CHECK(read_text(dir / "cell_0" / name) == read_text(plain / name));
  }
  CHECK(fs::exists(dir / "sweep.csv"));
  fs::remove_all(dir);
  fs::remove_all(plain);
}

TEST_CASE("runs are deterministic and independent of worker count") {
  ExperimentConfig cfg = parse_config(kGridYaml);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_config(cfg, a);
  cfg.workers = 1;
  run_config(cfg, b);
  for (const char* name : {"record_seed3.csv", "record_seed4.csv", "curves.csv"})
    CHECK(read_text(a / name) == read_text(b / name));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("testbed run writes artifacts that verify and aggregate") {
  const fs::path dir = scratch("testbed");
  const ExperimentConfig cfg = parse_config(kTestbedYaml);
  const ExperimentResult res = run_config(cfg, dir);
  write_text(dir / "config.yaml", kTestbedYaml);
  REQUIRE(res.seeds.size() == 2);
  for (const auto& s : res.seeds) {
    REQUIRE(s.certificate);
    CHECK(s.certificate->passed);
  }
  for (const char* name : {"record_seed0.csv", "trace_seed1.csv", "certificate_seed0.json", "curves.csv", "summary.json"})
    CHECK(fs::exists(dir / name));
  const auto summary = nlohmann::json::parse(read_text(dir / "summary.json"));
  CHECK(summary["seeds"].size() == 2);
  CHECK(summary["seeds"][0]["certificate_passed"] == true);

  std::ostringstream log;
  CHECK(verify_directory(dir, log));
  CHECK(log.str().find("PASS") != std::string::npos);

  const std::string curves = read_text(dir / "curves.csv");
  fs::remove(dir / "curves.csv");
  std::ostringstream agg;
  const CurveStats stats = aggregate_directory(dir, 0.2, agg);
  CHECK(stats.size() == 400);
  CHECK(read_text(dir / "curves.csv") == curves);

  // Editing a multiplier breaks the record/trace agreement.
  std::string rec = read_text(dir / "record_seed0.csv");
  const auto pos = rec.find('\n', rec.find('\n') + 1);
  rec.insert(pos, "1");
  write_text(dir / "record_seed0.csv", rec);
  std::ostringstream bad;
  CHECK_THROWS_AS(verify_directory(dir, bad), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("output root override") {
  ExperimentConfig cfg;
  cfg.output_dir = "runs/x";
  ::setenv("APD_OUTPUT_ROOT", "/tmp/root", 1);
  CHECK(resolve_output_dir(cfg) == fs::path("/tmp/root/runs/x"));
  cfg.output_dir = "/abs/place";
  CHECK(resolve_output_dir(cfg) == fs::path("/tmp/root/place"));
  ::unsetenv("APD_OUTPUT_ROOT");
  CHECK(resolve_output_dir(cfg) == fs::path("/abs/place"));
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  std::string yaml = kTestbedYaml;
  yaml += "output_dir: " + (dir / "out").string() + "\n";
  write_text(dir / "ok.yaml", yaml);
  write_text(dir / "bad.yaml", "schema_version: 1\ntask: testbed\nbogus: 1\n");

  CHECK(run_cli("run " + (dir / "ok.yaml").string()) == 0);
  CHECK(fs::exists(dir / "out" / "config.yaml"));
  CHECK(run_cli("verify " + (dir / "out").string()) == 0);
  CHECK(run_cli("aggregate " + (dir / "out").string()) == 0);
  CHECK(run_cli("run " + (dir / "bad.yaml").string()) == 2);
  CHECK(run_cli("run " + (dir / "missing.yaml").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("sweep " + (dir / "ok.yaml").string() + " --grid 'zz*2'") == 2);
  CHECK(run_cli("verify " + (dir / "nowhere").string()) != 0);
  CHECK(run_cli("aggregate " + dir.string()) == 3);
  fs::remove_all(dir);
}
