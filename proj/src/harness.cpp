#include "apd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "apd/record_io.hpp"

namespace apd {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double first(const Vector& v) { return v.size() ? v[0] : 0.0; }

void push_band(CurveStats::Band& band, const std::vector<double>& values) {
  double sum = 0.0, lo = values.front(), hi = values.front();
  for (double v : values) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Clamp guards against the rounded mean drifting outside [min, max].
  band.mean.push_back(std::clamp(sum / static_cast<double>(values.size()), lo, hi));
  band.min.push_back(lo);
  band.max.push_back(hi);
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json certificate_json(const BoundCertificate& c) {
  json out;
  out["passed"] = c.passed;
  out["lambda_star"] = c.lambda_star;
  out["dual_optimum"] = c.dual_optimum;
  out["value_lipschitz"] = c.l_value;
  out["cost_bound"] = c.cost_bound;
  out["gamma"] = c.gamma;
  out["asymptotic_term"] = c.asymptotic_term;
  out["iterations"] = c.rows.size();
  out["flagged_iterations"] = c.flagged;
  out["worst_dual_gap_slack"] = c.worst_dual_gap_slack;
  out["worst_primal_average_slack"] = c.worst_primal_average_slack;
  out["worst_smooth_slack"] = optional_json(c.worst_smooth_slack);
  out["worst_contraction_slack"] = optional_json(c.worst_contraction_slack);
  out["worst_closed_form_slack"] = optional_json(c.worst_optimal_rate_slack);
  out["step_size_optimality"] = c.optimality_ok;
  out["dual_gap_monotone"] = c.dual_gap_monotone;
  out["final_dual_gap"] = c.rows.empty() ? 0.0 : c.rows.back().dual_gap;
  return out;
}

std::vector<RunRecord> records_of(const std::vector<SeedResult>& seeds) {
  std::vector<RunRecord> out;
  out.reserve(seeds.size());
  for (const auto& s : seeds) out.push_back(s.record);
  return out;
}

std::string seed_file(const char* prefix, std::uint64_t seed, const char* ext) {
  return std::string(prefix) + "_seed" + std::to_string(seed) + ext;
}

}  // namespace

CurveStats aggregate_seeds(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate_seeds: no records");
  const std::size_t k = records.front().rows.size();
  for (const auto& r : records)
    if (r.rows.size() != k) throw std::invalid_argument("aggregate_seeds: records differ in length");
  CurveStats out;
  std::vector<double> ret(records.size()), cost(records.size()), lr(records.size()),
      lambda(records.size());
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t s = 0; s < records.size(); ++s) {
      const RunRow& row = records[s].rows[i];
      ret[s] = row.reward;
      cost[s] = first(row.costs);
      lr[s] = row.lr;
      lambda[s] = first(row.lambda);
    }
    push_band(out.ret, ret);
    push_band(out.cost, cost);
    push_band(out.lr, lr);
    push_band(out.lambda, lambda);
  }
  return out;
}

std::string curves_csv(const CurveStats& stats) {
  std::string out =
      "step,return_mean,return_min,return_max,cost_mean,cost_min,cost_max,"
      "lr_mean,lr_min,lr_max,lambda_mean,lambda_min,lambda_max\n";
  for (std::size_t i = 0; i < stats.size(); ++i) {
    out += std::to_string(i);
    for (const auto* band : {&stats.ret, &stats.cost, &stats.lr, &stats.lambda})
      for (const auto* col : {&band->mean, &band->min, &band->max}) {
        out += ',';
        out += format_double((*col)[i]);
      }
    out += '\n';
  }
  return out;
}

WindowMeans final_window(const RunRecord& rec, double fraction) {
  if (rec.rows.empty()) throw std::invalid_argument("final_window: empty record");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("final_window: fraction must lie in (0, 1]");
  const std::size_t k = rec.rows.size();
  const std::size_t w = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(k))));
  WindowMeans out;
  for (std::size_t i = k - w; i < k; ++i) {
    out.ret += rec.rows[i].reward;
    out.cost += first(rec.rows[i].costs);
  }
  out.ret /= static_cast<double>(w);
  out.cost /= static_cast<double>(w);
  return out;
}

WindowSummary summarize_windows(const std::vector<RunRecord>& records, double fraction) {
  if (records.empty()) throw std::invalid_argument("summarize_windows: no records");
  std::vector<WindowMeans> w;
  for (const auto& r : records) w.push_back(final_window(r, fraction));
  const double n = static_cast<double>(w.size());
  WindowSummary s;
  for (const auto& x : w) {
    s.return_mean += x.ret / n;
    s.cost_mean += x.cost / n;
  }
  if (w.size() > 1) {
    for (const auto& x : w) {
      s.return_std += (x.ret - s.return_mean) * (x.ret - s.return_mean);
      s.cost_std += (x.cost - s.cost_mean) * (x.cost - s.cost_mean);
    }
    s.return_std = std::sqrt(s.return_std / (n - 1.0));
    s.cost_std = std::sqrt(s.cost_std / (n - 1.0));
  }
  return s;
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedResult out;
  out.seed = seed;
  const SolverConfig solver = resolved_solver(cfg, seed);
  if (cfg.task == TaskKind::Testbed) {
    const QuadProgram prog = make_testbed(cfg);
    out.record = apd_run(prog, solver);
    if (solver.dual == DualVariant::Ascent) {
      CertificateOptions opts;
      opts.gamma = cfg.discount;
      out.certificate = verify_bounds(out.record, prog, prog.smoothness(), solver.zeta, opts);
    }
  } else {
    const Cmdp env = make_task_env(cfg);
    out.record = papd_run(env, initial_policy(cfg), solver);
  }
  return out;
}

ExperimentResult run_config(const ExperimentConfig& cfg, const fs::path& out_dir) {
  validate_config(cfg);
  ExperimentResult res;
  res.output_dir = out_dir;
  res.seeds.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.workers,
               [&](std::size_t i) { res.seeds[i] = run_seed(cfg, cfg.seeds[i]); });

  const auto records = records_of(res.seeds);
  res.curves = aggregate_seeds(records);
  res.summary = summarize_windows(records, cfg.final_window);
  if (out_dir.empty()) return res;

  fs::create_directories(out_dir);
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(out_dir / name, text);
    res.artifacts.push_back(out_dir / name);
  };

  json summary;
  summary["schema_version"] = kSchemaVersion;
  summary["task"] = std::string(to_string(cfg.task));
  summary["algorithm"] = std::string(to_string(cfg.algorithm));
  summary["schedule"] = std::string(to_string(cfg.solver.schedule.kind));
  summary["dual"] = cfg.solver.dual == DualVariant::Ascent ? "ascent" : "pid";
  summary["iterations"] = cfg.solver.iterations;
  summary["cost_limit"] = cfg.cost_limit;
  summary["final_window"] = cfg.final_window;
  json seeds = json::array();
  const ConstraintSpec spec{Vector::Constant(1, cfg.cost_limit)};
  for (const SeedResult& s : res.seeds) {
    emit(seed_file("record", s.seed, ".csv"), record_csv(s.record));
    const WindowMeans w = final_window(s.record, cfg.final_window);
    json entry;
    entry["seed"] = s.seed;
    entry["final_window_return"] = w.ret;
    entry["final_window_cost"] = w.cost;
    entry["final_lambda"] = vector_json(s.record.final_lambda);
    entry["wall_seconds"] = s.record.wall_seconds;
    if (cfg.task == TaskKind::Testbed) {
      emit(seed_file("trace", s.seed, ".csv"), trace_csv(s.record));
      entry["final_theta"] = vector_json(s.record.final_theta);
      FeasibilityOptions fo;
      fo.window = cfg.final_window;
      if (cfg.solver.dual == DualVariant::Ascent) fo.zeta = cfg.solver.zeta;
      const FeasibilityReport feas = feasibility_check(s.record, spec, fo);
      entry["average_cost"] = vector_json(feas.full_average);
      entry["average_feasible"] = feas.passed;
    }
    if (s.certificate) {
      emit(seed_file("certificate", s.seed, ".json"), certificate_json(*s.certificate).dump(2) + "\n");
      entry["certificate_passed"] = s.certificate->passed;
    }
    seeds.push_back(entry);
  }
  summary["seeds"] = seeds;
  summary["return_mean"] = res.summary.return_mean;
  summary["return_std"] = res.summary.return_std;
  summary["cost_mean"] = res.summary.cost_mean;
  summary["cost_std"] = res.summary.cost_std;
  emit("curves.csv", curves_csv(res.curves));
  emit("summary.json", summary.dump(2) + "\n");
  return res;
}

fs::path resolve_output_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  if (const char* root = std::getenv("APD_OUTPUT_ROOT"); root && *root)
    return fs::path(root) / (dir.is_absolute() ? dir.filename() : dir);
  return dir;
}

ExperimentResult run_experiment(const fs::path& config_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const fs::path out = resolve_output_dir(cfg);
  ExperimentResult res = run_config(cfg, out);
  write_text(out / "config.yaml", read_text(config_path));
  res.artifacts.push_back(out / "config.yaml");
  return res;
}

GridSpec parse_grid(const std::string& text) {
  static const std::regex pattern(R"(^\s*(lr|h1|h2)\s*([*=])\s*(.+)$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern))
    throw std::invalid_argument("grid '" + text + "': expected lr|h1|h2 followed by '*' or '=' and a list");
  GridSpec g;
  g.parameter = m[1];
  g.factors = m[2] == "*";
  std::stringstream items(m[3].str());
  std::string item;
  while (std::getline(items, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::invalid_argument("grid '" + text + "': empty entry");
    double v = 0.0;
    try {
      v = parse_double(item.substr(b, e - b + 1));
    } catch (const std::runtime_error& err) {
      throw std::invalid_argument("grid '" + text + "': " + err.what());
    }
    if (!(v > 0.0)) throw std::invalid_argument("grid '" + text + "': entries must be positive");
    g.values.push_back(v);
  }
  if (g.values.empty()) throw std::invalid_argument("grid '" + text + "': no values");
  return g;
}

ExperimentConfig apply_grid_cell(const ExperimentConfig& base, const GridSpec& grid, std::size_t cell) {
  if (cell >= grid.values.size()) throw std::out_of_range("apply_grid_cell: cell out of range");
  ExperimentConfig cfg = base;
  LrSchedule& s = cfg.solver.schedule;
  double* target = nullptr;
  if (grid.parameter == "lr") {
    if (s.kind != ScheduleKind::Constant)
      throw std::invalid_argument("grid over lr needs the constant schedule");
    target = &s.lr;
  } else {
    if (!s.is_practical())
      throw std::invalid_argument("grid over " + grid.parameter + " needs a practical schedule");
    target = grid.parameter == "h1" ? &s.h1 : &s.h2;
  }
  *target = grid.factors ? *target * grid.values[cell] : grid.values[cell];
  return cfg;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const GridSpec& grid, const fs::path& out_dir) {
  if (grid.values.empty()) throw std::invalid_argument("sweep: empty grid");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    const ExperimentConfig cfg = apply_grid_cell(base, grid, i);
    const fs::path cell_dir = out_dir.empty() ? fs::path() : out_dir / ("cell_" + std::to_string(i));
    const ExperimentResult res = run_config(cfg, cell_dir);
    SweepRow row;
    row.parameter = grid.parameter;
    row.setting = grid.values[i];
    const LrSchedule& s = cfg.solver.schedule;
    row.value = grid.parameter == "lr" ? s.lr : grid.parameter == "h1" ? s.h1 : s.h2;
    row.stats = res.summary;
    rows.push_back(row);
  }
  if (!out_dir.empty()) write_text(out_dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "parameter,setting,value,return_mean,return_std,cost_mean,cost_std\n";
  for (const SweepRow& r : rows) {
    out += r.parameter;
    for (double v : {r.setting, r.value, r.stats.return_mean, r.stats.return_std,
                     r.stats.cost_mean, r.stats.cost_std}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

// (seed, path) for files named <prefix>_seed<N>.csv, sorted by seed.
std::vector<std::pair<std::uint64_t, fs::path>> seed_files(const fs::path& dir, const std::string& prefix) {
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
  const std::regex pattern(prefix + R"(_seed(\d+)\.csv)");
  std::vector<std::pair<std::uint64_t, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, pattern)) out.emplace_back(std::stoull(m[1]), entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

bool verify_directory(const fs::path& dir, std::ostream& log) {
  const ExperimentConfig cfg = load_config(dir / "config.yaml");
  if (cfg.task != TaskKind::Testbed || cfg.solver.dual != DualVariant::Ascent)
    throw std::runtime_error("verify: certificates exist only for testbed runs with dual ascent");
  const QuadProgram prog = make_testbed(cfg);
  const auto files = seed_files(dir, "record");
  if (files.empty()) throw std::runtime_error("verify: no record_seed*.csv in " + dir.string());
  bool all = true;
  for (const auto& [seed, path] : files) {
    RunRecord rec;
    try {
      rec = parse_record_csv(read_text(path));
      attach_trace(rec, read_text(dir / seed_file("trace", seed, ".csv")), prog.constraint().d);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
    rec.kind = RecordKind::Exact;
    rec.dual = cfg.solver.dual;
    rec.schedule = cfg.solver.schedule.kind;
    rec.zeta = cfg.solver.zeta;
    rec.inner_steps = cfg.solver.inner_steps;
    CertificateOptions opts;
    opts.gamma = cfg.discount;
    const BoundCertificate cert = verify_bounds(rec, prog, prog.smoothness(), cfg.solver.zeta, opts);
    log << "seed " << seed << ": " << cert.summary() << "\n";
    all = all && cert.passed;
  }
  return all;
}

CurveStats aggregate_directory(const fs::path& dir, double fraction, std::ostream& log) {
  const auto files = seed_files(dir, "record");
  if (files.empty()) throw std::runtime_error("aggregate: no record_seed*.csv in " + dir.string());
  std::vector<RunRecord> records;
  for (const auto& [seed, path] : files) {
    try {
      records.push_back(parse_record_csv(read_text(path)));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
  }
  const CurveStats stats = aggregate_seeds(records);
  write_text(dir / "curves.csv", curves_csv(stats));
  const WindowSummary s = summarize_windows(records, fraction);
  log << records.size() << " seeds, " << stats.size() << " steps; final window return "
      << s.return_mean << " +- " << s.return_std << ", cost " << s.cost_mean << " +- "
      << s.cost_std << "\n";
  return stats;
}

}  // namespace apd
