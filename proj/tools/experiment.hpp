#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridtopo/error.hpp"
#include "gridtopo/hssp.hpp"
#include "gridtopo/measurement.hpp"
#include "gridtopo/metrics.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo::experiment {

// Bad configuration: unknown keys, malformed values, missing files.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class ReportFormat { kJson, kCsv };

struct ExperimentConfig {
  std::vector<std::size_t> sizes{13};
  // Fixed feeder; replaces `sizes` with its node count.
  std::optional<std::string> topology_file;
  std::size_t timesteps = 10;
  double load_min = 25.0;  // kW
  double load_max = 50.0;  // kW
  std::vector<double> sigmas{0.01};
  NoiseMode noise_mode = NoiseMode::kAdditive;
  AggregationMode aggregation = AggregationMode::kPureSum;
  std::vector<bool> hierarchy{true};
  double z = 3.0;
  double tolerance_floor = 1e-9;
  std::size_t max_children = 8;
  std::size_t branching = 4;
  SolverBackend backend = SolverBackend::kBranchBound;
  // The backend only matters with per-timestep tallying.
  Tallying tallying = Tallying::kLeaders;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
  // Timings vary between runs; off keeps reports byte-identical.
  bool timing = false;
  std::string preset;
  // Where and how the CLI writes the report. Left out of the config echo,
  // along with `threads`, so reruns elsewhere compare byte for byte.
  std::optional<std::string> out;
  ReportFormat format = ReportFormat::kJson;
};

// Flat key = value settings, as read from a config file or flags.
using Settings = std::map<std::string, std::string>;

// Keys accepted in config files, with one-line descriptions.
const std::vector<std::pair<std::string, std::string>>& known_keys();

// Lines of `key = value`; '#' starts a comment; lists are comma separated and
// integer lists also accept `a..b`.
Settings parse_settings(std::string_view text);
Settings preset_settings(std::string_view name);
// Later layers override earlier ones.
ExperimentConfig make_config(const std::vector<Settings>& layers);
void validate(const ExperimentConfig& config);

struct RunRecord {
  std::size_t size = 0;
  double sigma = 0.0;
  bool hierarchy = true;
  std::uint64_t seed = 0;
  std::optional<AccuracyReport> report;
  std::string error;
};

struct CellStats {
  std::size_t size = 0;
  double sigma = 0.0;
  bool hierarchy = true;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_f1 = 0.0;
  double mean_wall_s = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunRecord> runs;   // size, sigma, hierarchy, seed order
  std::vector<CellStats> cells;  // size, sigma, hierarchy order
};

struct Instance {
  Topology topology;
  MeasurementMatrix clean;
  MeasurementMatrix noisy;
};

// Topology and loads depend on (master seed, size, seed) only, so every sigma
// and hierarchy setting sees the same feeder; the noise also mixes in sigma.
Instance make_instance(const ExperimentConfig& config, std::size_t size, double sigma,
                       std::uint64_t seed, const Topology* fixed = nullptr);
HsspOptions hssp_options(const ExperimentConfig& config, const Topology& truth,
                         bool hierarchy);

// First size, sigma, hierarchy setting and seed only.
ExperimentResult run_single(const ExperimentConfig& config);
// Full cross product; a failed run is recorded in its cell and the sweep goes on.
ExperimentResult run_sweep(const ExperimentConfig& config);

std::string emit_report(const ExperimentResult& result, ReportFormat format);

ReportFormat parse_format(std::string_view text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace gridtopo::experiment
