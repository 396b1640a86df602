#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "apd/certificate.hpp"
#include "apd/config.hpp"
#include "apd/solver.hpp"

namespace apd {

/// Pointwise statistics across seeds (first constraint for cost and lambda).
struct CurveStats {
  struct Band {
    std::vector<double> mean, min, max;
  };
  Band ret, cost, lr, lambda;
  std::size_t size() const { return ret.mean.size(); }
};

/// Throws std::invalid_argument on an empty list or differing lengths.
CurveStats aggregate_seeds(const std::vector<RunRecord>& records);
std::string curves_csv(const CurveStats& stats);

/// Mean return and first-constraint cost over the trailing `fraction` of rows.
struct WindowMeans {
  double ret = 0.0;
  double cost = 0.0;
};
WindowMeans final_window(const RunRecord& rec, double fraction);

/// Mean and sample standard deviation of the per-seed window means.
struct WindowSummary {
  double return_mean = 0.0, return_std = 0.0;
  double cost_mean = 0.0, cost_std = 0.0;
};
WindowSummary summarize_windows(const std::vector<RunRecord>& records, double fraction);

struct SeedResult {
  std::uint64_t seed = 0;
  RunRecord record;
  std::optional<BoundCertificate> certificate;  // testbed with dual ascent only
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  CurveStats curves;
  WindowSummary summary;
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> artifacts;
};

/// One seed of an experiment, including the certificate where it applies.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed on up to cfg.workers threads. With a nonempty out_dir,
/// writes record_seed<N>.csv, trace_seed<N>.csv (testbed),
/// certificate_seed<N>.json (testbed), curves.csv and summary.json.
ExperimentResult run_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// cfg.output_dir under $APD_OUTPUT_ROOT when that variable is set.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

/// Loads, runs and persists; also copies the config into the output folder.
ExperimentResult run_experiment(const std::filesystem::path& config_path);

/// `name*f1,f2,...` scales the base value; `name=v1,v2,...` sets it.
/// name is lr (constant schedule), h1 or h2 (practical schedules).
struct GridSpec {
  std::string parameter;
  bool factors = true;
  std::vector<double> values;
};
GridSpec parse_grid(const std::string& text);

struct SweepRow {
  std::string parameter;
  double setting = 0.0;  // factor or absolute value as given
  double value = 0.0;    // effective parameter value
  WindowSummary stats;
};

/// Applies one grid cell to a copy of the config.
ExperimentConfig apply_grid_cell(const ExperimentConfig& base, const GridSpec& grid, std::size_t cell);

/// Runs every cell (cells in sequence, seeds in parallel). With a nonempty
/// out_dir each cell is persisted under cell_<i>/ and the table as sweep.csv.
std::vector<SweepRow> sweep(const ExperimentConfig& base, const GridSpec& grid,
                            const std::filesystem::path& out_dir);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Recomputes certificates from a run folder (config.yaml, record and trace
/// CSVs). Returns true when every certificate passes.
bool verify_directory(const std::filesystem::path& dir, std::ostream& log);

/// Aggregates every record_seed*.csv in a folder into curves.csv and
/// window statistics.
CurveStats aggregate_directory(const std::filesystem::path& dir, double fraction, std::ostream& log);

}  // namespace apd
