#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnis/exact.hpp"
#include "qnis/network.hpp"
#include "qnis/sampler.hpp"
#include "qnis/subsolution.hpp"

namespace qnis {

/// Configuration problems map to the CLI's usage/config exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  NetworkKind kind = NetworkKind::Tandem;
  double lambda = 0.0;
  std::vector<double> mu;  // tandem: per node; feedback: {mu1, mu2}
  double beta = 0.0;       // feedback only

  NetworkModel build() const;
};

struct ExperimentConfig {
  ModelConfig model;
  TargetSet::Kind target_kind = TargetSet::Kind::TotalPopulation;
  std::vector<double> bounds;  // individual buffers only
  std::vector<std::int64_t> n_values;
  std::string kernel = "subsolution";  // subsolution | standard | plain
  double epsilon = 0.02;
  std::optional<double> delta;  // empty = auto rule -eps*log(eps)
  bool schedule = false;        // eps_n = n^{-1/2}, delta_n = auto(eps_n)
  std::uint64_t replications = 20'000;
  std::uint64_t seed = 1;
  int workers = 0;
  bool exact = true;
  std::string output = "results";

  TargetSet target() const;
  double delta_value() const;  // resolves the auto rule against epsilon

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  std::string to_json_text() const;  // single line, round-trips every field
};

/// Built-in parameter sets reproducing the reference tables; ids "1", "2",
/// "4".."9".
ExperimentConfig table_config(const std::string& id);
std::vector<std::string> table_ids();

struct RunRow {
  std::int64_t n = 0;
  std::string kernel;
  std::optional<EstimatorStats> stats;  // absent for oracle-only runs
  std::optional<double> exact_value;    // absent when the oracle is off/infeasible
  double analytic_gamma = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t replications = 0;
  std::uint64_t seed = 0;
};

struct RunOutput {
  ExperimentConfig config;
  std::vector<RunRow> rows;
};

/// Runs the configured estimator (and oracle) for every n. An infeasible
/// oracle degrades to an absent exact value; estimator failures propagate.
RunOutput run_experiment(const ExperimentConfig& config);

/// Oracle-only variant; throws OracleInfeasible instead of degrading.
RunOutput run_exact(const ExperimentConfig& config);

/// Deterministic CSV: a `# config <json>` metadata line, a header, then one
/// row per (n, kernel) with 4-significant-digit scientific notation. Identical
/// bytes for identical (config, seed), so no wall times here (they live in the
/// JSON summary).
void write_csv(const RunOutput& output, std::ostream& os);
std::string to_csv(const RunOutput& output);

/// JSON summary with the config echoed and per-row wall times.
std::string summary_json(const RunOutput& output);

/// Recovers the configuration from a CSV produced by write_csv.
ExperimentConfig config_from_csv(const std::string& csv);

struct VerifyOptions {
  int sample_count = 1000;
  int saddle_resolution = 60;
  int random_gradients = 12;
};

/// One JSON document combining the subsolution verification report with
/// saddle-point checks at each piece gradient plus seeded random gradients.
std::string run_verification(const ExperimentConfig& config,
                             const VerifyOptions& options = {});

}  // namespace qnis
