#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "apd/envs.hpp"
#include "apd/solver.hpp"

namespace apd {

inline constexpr int kSchemaVersion = 1;

/// Parse or validation failure; the message carries the line when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { Testbed, Gridworld, PointRun, PointCircle };
enum class AlgorithmKind { Apd, PapdReinforce, PapdPpol };

std::string_view to_string(TaskKind t);
std::string_view to_string(AlgorithmKind a);

struct TestbedSpec {
  Matrix q = Matrix::Identity(2, 2);
  Vector b = Vector::Ones(2);
  Matrix p = Matrix::Identity(2, 2);
  Vector c = Vector::Zero(2);
  Vector theta0;  // empty: zeros
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  TaskKind task = TaskKind::Testbed;
  AlgorithmKind algorithm = AlgorithmKind::Apd;
  std::vector<std::uint64_t> seeds{0};
  std::size_t workers = 1;
  std::string output_dir = "runs";
  double cost_limit = 10.0;
  double discount = 0.99;
  double final_window = 0.2;

  // Solver settings except the constraint, which comes from cost_limit.
  SolverConfig solver;
  TestbedSpec testbed;
  GridworldSpec gridworld;
  PointEnvConfig point;
  double init_log_std = -0.6931471805599453;  // log 0.5
};

/// Reads and validates a YAML experiment file.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Same, from text; `origin` prefixes error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");

/// Cross-field checks shared by the loader and programmatic callers.
void validate_config(const ExperimentConfig& cfg);

QuadProgram make_testbed(const ExperimentConfig& cfg);
Cmdp make_task_env(const ExperimentConfig& cfg);
PolicyParams initial_policy(const ExperimentConfig& cfg);

/// Solver settings with the constraint and exact-schedule constants filled in.
SolverConfig resolved_solver(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace apd
