#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

#include "qnis/experiment.hpp"

using namespace qnis;
using nlohmann::json;

namespace {

ExperimentConfig tiny_config() {
  auto c = table_config("1");
  c.n_values = {3, 5};
  c.replications = 500;
  c.workers = 2;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QNIS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "qnis_cli_test") {
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE_BEGIN("experiment");

TEST_CASE("config json round trip preserves every field") {
  for (const auto& id : table_ids()) {
    const auto config = table_config(id);
    const auto parsed = ExperimentConfig::from_json_text(config.to_json_text());
    CHECK(parsed.to_json_text() == config.to_json_text());
  }

  // the shipped config files and the built-ins stay in sync
  for (const auto& id : table_ids()) {
    const auto path = std::string(QNIS_CONFIG_DIR) + "/table" + id + ".json";
    const auto from_file = ExperimentConfig::from_json_file(path);
    CHECK(from_file.to_json_text() == table_config(id).to_json_text());
  }

  auto with_delta = table_config("5");
  with_delta.delta = 0.07;
  with_delta.schedule = true;
  const auto parsed = ExperimentConfig::from_json_text(with_delta.to_json_text());
  REQUIRE(parsed.delta.has_value());
  CHECK(*parsed.delta == 0.07);
  CHECK(parsed.schedule);
  CHECK(parsed.delta_value() == 0.07);
  CHECK(table_config("1").delta_value() ==
        doctest::Approx(-0.02 * std::log(0.02)).epsilon(1e-14));
}

TEST_CASE("config parsing rejects malformed input") {
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{ nope"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{}"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                      R"({"model":{"kind":"ring","lambda":0.1,"mu":[0.4]},"n":[3]})"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                      R"({"model":{"kind":"tandem","lambda":0.5,"mu":[0.4,0.4]},"n":[3]})"),
                  ConfigError);  // unstable
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                      R"({"model":{"kind":"tandem","lambda":0.1,"mu":[0.4,0.4]},"n":[3],"delta":"soon"})"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                      R"({"model":{"kind":"tandem","lambda":0.1,"mu":[0.4,0.4]},"n":[0]})"),
                  ConfigError);
  CHECK_THROWS_AS(table_config("3"), ConfigError);

  auto bad_kernel = tiny_config();
  bad_kernel.kernel = "antithetic";
  CHECK_THROWS_AS(run_experiment(bad_kernel), ConfigError);
}

TEST_CASE("experiment rows carry estimates, oracle values and rates") {
  const auto output = run_experiment(tiny_config());
  REQUIRE(output.rows.size() == 2);
  for (const auto& row : output.rows) {
    REQUIRE(row.stats.has_value());
    REQUIRE(row.exact_value.has_value());
    CHECK(row.stats->replications == 500);
    CHECK(row.analytic_gamma == doctest::Approx(std::log(4.5)));
    CHECK(row.wall_seconds >= 0.0);
  }
  CHECK(output.rows[0].n == 3);
  CHECK(output.rows[1].n == 5);
}

TEST_CASE("csv output is deterministic and recovers the config") {
  const auto config = tiny_config();
  const auto a = to_csv(run_experiment(config));
  const auto b = to_csv(run_experiment(config));
  CHECK(a == b);

  const auto recovered = config_from_csv(a);
  CHECK(recovered.to_json_text() == config.to_json_text());

  // wall times live in the JSON summary, not the CSV
  CHECK(a.find("wall") == std::string::npos);
  const auto summary = json::parse(summary_json(run_experiment(config)));
  CHECK(summary["rows"][0].contains("wall_time_s"));
  CHECK(summary["rows"][0].contains("hit_count"));
  CHECK(summary["config"]["seed"] == config.seed);

  CHECK_THROWS_AS(config_from_csv("n,kernel\n3,plain\n"), ConfigError);
}

TEST_CASE("every shipped table configuration executes end-to-end") {
  for (const auto& id : table_ids()) {
    auto config = table_config(id);
    config.replications = 200;  // full scale is exercised by the acceptance suite
    config.workers = 2;
    const auto output = run_experiment(config);
    REQUIRE(output.rows.size() == config.n_values.size());
    for (const auto& row : output.rows) {
      REQUIRE(row.stats.has_value());
      CHECK(row.stats->replications == 200);
      CHECK(row.exact_value.has_value() == config.exact);
    }
  }
}

TEST_CASE("scale-dependent schedule drives the kernel parameters") {
  auto config = tiny_config();
  config.schedule = true;  // eps_n = n^{-1/2}, delta_n = -eps_n log eps_n
  const auto scheduled = run_experiment(config);
  config.schedule = false;
  const auto fixed = run_experiment(config);
  REQUIRE(scheduled.rows.size() == 2);
  for (const auto& row : scheduled.rows) CHECK(row.stats.has_value());
  // different kernels must produce different samples at the same seed
  CHECK(scheduled.rows[0].stats->mean != fixed.rows[0].stats->mean);
  // deterministic under the schedule as well
  const auto again = run_experiment(config);
  CHECK(again.rows[0].stats->mean == fixed.rows[0].stats->mean);
}

TEST_CASE("oracle-only rows leave the estimator columns empty") {
  auto config = tiny_config();
  const auto output = run_exact(config);
  REQUIRE(output.rows.size() == 2);
  CHECK_FALSE(output.rows[0].stats.has_value());
  REQUIRE(output.rows[0].exact_value.has_value());
  const auto csv = to_csv(output);
  CHECK(csv.find("3,exact,,,,") != std::string::npos);
}

TEST_CASE("infeasible oracle degrades to an absent exact value") {
  auto config = table_config("7");  // d = 9 at paper scale
  config.n_values = {20};
  config.replications = 200;
  config.exact = true;  // forces the attempt
  const auto output = run_experiment(config);
  REQUIRE(output.rows.size() == 1);
  CHECK(output.rows[0].stats.has_value());
  CHECK_FALSE(output.rows[0].exact_value.has_value());
}

TEST_CASE("verification document aggregates subsolution and saddle checks") {
  auto config = table_config("8");
  VerifyOptions options;
  options.sample_count = 200;
  options.saddle_resolution = 30;
  options.random_gradients = 4;
  const auto doc = json::parse(run_verification(config, options));
  CHECK(doc["subsolution"]["all_ok"] == true);
  REQUIRE(doc["saddle"].is_array());
  CHECK(doc["saddle"].size() == 3 + 4);
  for (const auto& check : doc["saddle"]) {
    CHECK(check["gap"].get<double>() >= -1e-9);
    CHECK(std::abs(check["attained"].get<double>() - check["analytic"].get<double>()) <=
          1e-10);
  }
}

TEST_CASE("cli subcommands and exit codes") {
  TempDir dir;
  const auto config_path = dir.file("config.json");
  {
    auto config = tiny_config();
    config.output = dir.file("out");
    std::ofstream(config_path) << config.to_json_text();
  }

  CHECK(run_cli("") == 1);
  CHECK(run_cli("bogus") == 1);
  CHECK(run_cli("estimate") == 1);                              // missing --config
  CHECK(run_cli("estimate --config " + dir.file("nope.json")) == 1);
  CHECK(run_cli("table 3") == 1);
  CHECK(run_cli("estimate --config " + config_path + " --delta never") == 1);

  CHECK(run_cli("estimate --config " + config_path) == 0);
  CHECK(std::filesystem::exists(dir.file("out.csv")));
  CHECK(std::filesystem::exists(dir.file("out.json")));

  CHECK(run_cli("exact --config " + config_path) == 0);
  CHECK(std::filesystem::exists(dir.file("out.exact_cache.json")));

  CHECK(run_cli("verify --config " + config_path) == 0);
  CHECK(std::filesystem::exists(dir.file("out.verify.json")));

  CHECK(run_cli("table 1 --reps 200 --seed 9 --out " + dir.file("t1")) == 0);
  CHECK(std::filesystem::exists(dir.file("t1.csv")));

  // oracle infeasible when required -> runtime failure
  {
    auto config = table_config("7");
    config.n_values = {20};
    config.output = dir.file("big");
    std::ofstream(dir.file("big.json")) << config.to_json_text();
  }
  CHECK(run_cli("exact --config " + dir.file("big.json")) == 2);
}

TEST_SUITE_END();
