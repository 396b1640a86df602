#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "apd/config.hpp"
#include "apd/harness.hpp"
#include "apd/record_io.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCertificateFailed = 1;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

void print_summary(const apd::WindowSummary& s) {
  std::cout << "final window: return " << s.return_mean << " +- " << s.return_std
            << ", cost " << s.cost_mean << " +- " << s.cost_std << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive primal-dual experiments"};
  app.require_subcommand(1);

  std::string config_path, grid_text, dir;
  double window = 0.2;

  auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
  run->add_option("config", config_path, "YAML experiment file")->required();

  auto* sweep = app.add_subcommand("sweep", "Run a learning-rate grid");
  sweep->add_option("config", config_path, "YAML experiment file")->required();
  sweep->add_option("--grid", grid_text, "e.g. 'h1*0.2,0.4,1' or 'lr=1e-4,5e-4'")->required();

  auto* verify = app.add_subcommand("verify", "Recompute bound certificates of a testbed run");
  verify->add_option("record-dir", dir, "Output folder of a testbed run")->required();

  auto* aggregate = app.add_subcommand("aggregate", "Aggregate seed CSVs into curves.csv");
  aggregate->add_option("dir", dir, "Folder holding record_seed*.csv")->required();
  aggregate->add_option("--window", window, "Trailing fraction for final-window statistics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) {
      const auto res = apd::run_experiment(config_path);
      bool certified = true;
      for (const auto& s : res.seeds) {
        if (!s.certificate) continue;
        std::cout << "seed " << s.seed << ": " << s.certificate->summary() << "\n";
        certified = certified && s.certificate->passed;
      }
      print_summary(res.summary);
      std::cout << "wrote " << res.artifacts.size() << " files to " << res.output_dir.string() << "\n";
      return certified ? kOk : kCertificateFailed;
    }
    if (sweep->parsed()) {
      const apd::ExperimentConfig cfg = apd::load_config(config_path);
      apd::GridSpec grid;
      try {
        grid = apd::parse_grid(grid_text);
      } catch (const std::invalid_argument& e) {
        throw apd::ConfigError(e.what());
      }
      const auto out = apd::resolve_output_dir(cfg);
      const auto rows = apd::sweep(cfg, grid, out);
      std::cout << apd::sweep_csv(rows);
      apd::write_text(out / "config.yaml", apd::read_text(config_path));
      return kOk;
    }
    if (verify->parsed())
      return apd::verify_directory(dir, std::cout) ? kOk : kCertificateFailed;
    if (aggregate->parsed()) {
      apd::aggregate_directory(dir, window, std::cout);
      return kOk;
    }
  } catch (const apd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
