// qnis - rare-event estimation for queueing network overflows.
//
// Subcommands:
//   estimate  run the importance-sampling estimator (plus oracle when enabled)
//   exact     solve the first-step-analysis system only
//   verify    audit the subsolution and saddle-point properties, emit JSON
//   table ID  run a built-in reference configuration (1,2,4..9)
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qnis/exact.hpp"
#include "qnis/experiment.hpp"
#include "qnis/sampler.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> reps;
  std::optional<double> eps;
  std::optional<std::string> delta;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "Replication seed");
  cmd->add_option("--reps", ov.reps, "Replication count");
  cmd->add_option("--eps", ov.eps, "Mollification parameter epsilon");
  cmd->add_option("--delta", ov.delta, "Piece separation delta, or 'auto'");
  cmd->add_option("--workers", ov.workers, "Worker threads (0 = hardware)");
  cmd->add_option("--out", ov.out, "Output path prefix");
}

qnis::ExperimentConfig apply_overrides(qnis::ExperimentConfig config, const Overrides& ov) {
  if (ov.seed) config.seed = *ov.seed;
  if (ov.reps) config.replications = *ov.reps;
  if (ov.eps) config.epsilon = *ov.eps;
  if (ov.delta) {
    if (*ov.delta == "auto") {
      config.delta.reset();
    } else {
      try {
        config.delta = std::stod(*ov.delta);
      } catch (const std::exception&) {
        throw qnis::ConfigError("config: --delta expects a number or 'auto'");
      }
      if (*config.delta <= 0.0) throw qnis::ConfigError("config: delta must be positive");
    }
  }
  if (ov.workers) config.workers = *ov.workers;
  if (ov.out) config.output = *ov.out;
  return config;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

void print_rows(const qnis::RunOutput& output) {
  for (const auto& row : output.rows) {
    std::cout << "n=" << row.n << " kernel=" << row.kernel;
    if (row.stats) {
      std::printf(" estimate=%.3e std_err=%.3e ci95=[%.3e, %.3e] hits=%llu",
                  row.stats->mean, row.stats->std_err, row.stats->ci95_low,
                  row.stats->ci95_high,
                  static_cast<unsigned long long>(row.stats->hit_count));
      if (row.stats->empirical_decay_rate)
        std::printf(" decay=%.4f", *row.stats->empirical_decay_rate);
    }
    if (row.exact_value) std::printf(" exact=%.3e", *row.exact_value);
    std::printf(" gamma=%.4f (%.2fs)\n", row.analytic_gamma, row.wall_seconds);
  }
}

void emit_outputs(const qnis::RunOutput& output) {
  const std::string base = output.config.output;
  write_file(base + ".csv", qnis::to_csv(output));
  write_file(base + ".json", qnis::summary_json(output));
  print_rows(output);
  std::cout << "wrote " << base << ".csv, " << base << ".json\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic importance sampling for queueing-network overflow probabilities"};
  app.require_subcommand(1);

  std::string config_path;
  std::string table_id;
  Overrides ov;

  auto* cmd_estimate = app.add_subcommand("estimate", "Run the configured estimator");
  cmd_estimate->add_option("--config", config_path, "JSON experiment config")->required();
  add_override_flags(cmd_estimate, ov);

  auto* cmd_exact = app.add_subcommand("exact", "Solve the exact overflow probability");
  cmd_exact->add_option("--config", config_path, "JSON experiment config")->required();
  add_override_flags(cmd_exact, ov);

  auto* cmd_verify = app.add_subcommand("verify", "Verify subsolution and saddle properties");
  cmd_verify->add_option("--config", config_path, "JSON experiment config")->required();
  add_override_flags(cmd_verify, ov);

  auto* cmd_table = app.add_subcommand("table", "Run a built-in reference table");
  cmd_table->add_option("id", table_id, "Table id (1,2,4,5,6,7,8,9)")->required();
  add_override_flags(cmd_table, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_estimate) {
      const auto config =
          apply_overrides(qnis::ExperimentConfig::from_json_file(config_path), ov);
      emit_outputs(qnis::run_experiment(config));
    } else if (*cmd_exact) {
      auto config = apply_overrides(qnis::ExperimentConfig::from_json_file(config_path), ov);
      qnis::ExactCache cache(config.output + ".exact_cache.json");
      auto output = qnis::run_exact(config);
      for (const auto& row : output.rows)
        cache.store(config.model.build(), config.target(), row.n, 1e-12, *row.exact_value);
      emit_outputs(output);
    } else if (*cmd_verify) {
      const auto config =
          apply_overrides(qnis::ExperimentConfig::from_json_file(config_path), ov);
      const std::string doc = qnis::run_verification(config);
      write_file(config.output + ".verify.json", doc);
      std::cout << doc << '\n';
    } else if (*cmd_table) {
      const auto config = apply_overrides(qnis::table_config(table_id), ov);
      emit_outputs(qnis::run_experiment(config));
    }
  } catch (const qnis::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const qnis::OracleInfeasible& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const qnis::StepCapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
