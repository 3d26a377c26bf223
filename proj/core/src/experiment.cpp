#include "qnis/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "qnis/hamiltonian.hpp"

namespace qnis {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) { throw ConfigError("config: " + msg); }

double require_number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) config_fail(std::string(key) + " must be a number");
  return j[key].get<double>();
}

SubsolutionSpec build_spec(const NetworkModel& model, const TargetSet& target,
                           double epsilon, double delta,
                           std::span<const double> bounds) {
  if (target.kind() == TargetSet::Kind::IndividualBuffers)
    return build_individual_buffer(model, bounds, epsilon, delta);
  if (model.kind() == NetworkKind::Feedback)
    return build_feedback_total(model, epsilon, delta);
  return build_tandem_total(model, epsilon, delta);
}

std::unique_ptr<IsKernel> build_kernel(const ExperimentConfig& config,
                                       const NetworkModel& model,
                                       const TargetSet& target, std::int64_t n) {
  double epsilon = config.epsilon;
  double delta = config.delta_value();
  if (config.schedule) {
    epsilon = 1.0 / std::sqrt(static_cast<double>(n));
    delta = auto_delta(epsilon);
  }
  if (config.kernel == "subsolution")
    return kernel_subsolution(model, build_spec(model, target, epsilon, delta, config.bounds));
  if (config.kernel == "standard") return kernel_standard_heuristic(model);
  if (config.kernel == "plain") return kernel_plain(model);
  config_fail("unknown kernel '" + config.kernel + "' (expected subsolution|standard|plain)");
}

std::string format_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::string format_opt(const std::optional<double>& v) {
  return v ? format_sci(*v) : std::string();
}

}  // namespace

NetworkModel ModelConfig::build() const {
  try {
    if (kind == NetworkKind::Tandem)
      return NetworkModel::tandem(static_cast<int>(mu.size()), lambda, mu);
    if (mu.size() != 2) config_fail("feedback model needs mu1 and mu2");
    return NetworkModel::feedback(lambda, mu[0], mu[1], beta);
  } catch (const std::invalid_argument& e) {
    config_fail(e.what());
  }
}

TargetSet ExperimentConfig::target() const {
  if (target_kind == TargetSet::Kind::TotalPopulation) return TargetSet::total_population();
  try {
    return TargetSet::individual_buffers(bounds);
  } catch (const std::invalid_argument& e) {
    config_fail(e.what());
  }
}

double ExperimentConfig::delta_value() const {
  return delta ? *delta : auto_delta(epsilon);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_fail(e.what());  // nlohmann reports the offending position
  }

  ExperimentConfig config;
  try {
    if (!j.contains("model")) config_fail("missing model block");
    const json& jm = j["model"];
    const std::string kind = jm.value("kind", "");
    if (kind == "tandem") {
      config.model.kind = NetworkKind::Tandem;
      config.model.lambda = require_number(jm, "lambda");
      if (!jm.contains("mu") || !jm["mu"].is_array()) config_fail("tandem model needs a mu array");
      config.model.mu = jm["mu"].get<std::vector<double>>();
    } else if (kind == "feedback") {
      config.model.kind = NetworkKind::Feedback;
      config.model.lambda = require_number(jm, "lambda");
      config.model.mu = {require_number(jm, "mu1"), require_number(jm, "mu2")};
      config.model.beta = require_number(jm, "beta");
    } else {
      config_fail("model.kind must be 'tandem' or 'feedback'");
    }

    const json& jt = j.contains("target") ? j["target"] : json::object();
    const std::string target_kind = jt.value("kind", "total_population");
    if (target_kind == "total_population") {
      config.target_kind = TargetSet::Kind::TotalPopulation;
    } else if (target_kind == "individual_buffers") {
      config.target_kind = TargetSet::Kind::IndividualBuffers;
      if (!jt.contains("bounds") || !jt["bounds"].is_array())
        config_fail("individual_buffers target needs a bounds array");
      config.bounds = jt["bounds"].get<std::vector<double>>();
    } else {
      config_fail("target.kind must be 'total_population' or 'individual_buffers'");
    }

    if (!j.contains("n")) config_fail("missing n");
    if (j["n"].is_array())
      config.n_values = j["n"].get<std::vector<std::int64_t>>();
    else
      config.n_values = {j["n"].get<std::int64_t>()};
    if (config.n_values.empty()) config_fail("n must not be empty");
    for (auto n : config.n_values)
      if (n < 1) config_fail("every n must be >= 1");

    config.kernel = j.value("kernel", std::string("subsolution"));
    if (j.contains("epsilon")) config.epsilon = require_number(j, "epsilon");
    if (config.epsilon <= 0.0 || config.epsilon >= 1.0)
      config_fail("epsilon must lie in (0, 1)");
    if (j.contains("delta")) {
      if (j["delta"].is_string()) {
        if (j["delta"].get<std::string>() != "auto")
          config_fail("delta must be a number or 'auto'");
        config.delta.reset();
      } else if (j["delta"].is_number()) {
        config.delta = j["delta"].get<double>();
        if (*config.delta <= 0.0) config_fail("delta must be positive");
      } else {
        config_fail("delta must be a number or 'auto'");
      }
    }
    config.schedule = j.value("schedule", false);
    config.replications = j.value("replications", std::uint64_t{20'000});
    if (config.replications < 1) config_fail("replications must be >= 1");
    config.seed = j.value("seed", std::uint64_t{1});
    config.workers = j.value("workers", 0);
    config.exact = j.value("exact", true);
    config.output = j.value("output", std::string("results"));
  } catch (const json::exception& e) {
    config_fail(e.what());
  }

  config.model.build();  // surface parameter problems at parse time
  config.target();
  return config;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_fail("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return from_json_text(text.str());
}

std::string ExperimentConfig::to_json_text() const {
  json jm;
  if (model.kind == NetworkKind::Tandem) {
    jm = {{"kind", "tandem"}, {"lambda", model.lambda}, {"mu", model.mu}};
  } else {
    jm = {{"kind", "feedback"},
          {"lambda", model.lambda},
          {"mu1", model.mu[0]},
          {"mu2", model.mu[1]},
          {"beta", model.beta}};
  }
  json jt;
  if (target_kind == TargetSet::Kind::TotalPopulation) {
    jt = {{"kind", "total_population"}};
  } else {
    jt = {{"kind", "individual_buffers"}, {"bounds", bounds}};
  }
  json j = {{"model", jm},
            {"target", jt},
            {"n", n_values},
            {"kernel", kernel},
            {"epsilon", epsilon},
            {"schedule", schedule},
            {"replications", replications},
            {"seed", seed},
            {"workers", workers},
            {"exact", exact},
            {"output", output}};
  if (delta)
    j["delta"] = *delta;
  else
    j["delta"] = "auto";
  return j.dump();
}

ExperimentConfig table_config(const std::string& id) {
  ExperimentConfig c;
  c.seed = 1;
  c.output = "table" + id;
  auto tandem = [&](double lambda, std::vector<double> mu) {
    c.model.kind = NetworkKind::Tandem;
    c.model.lambda = lambda;
    c.model.mu = std::move(mu);
  };
  auto feedback = [&](double lambda, double mu1, double mu2, double beta) {
    c.model.kind = NetworkKind::Feedback;
    c.model.lambda = lambda;
    c.model.mu = {mu1, mu2};
    c.model.beta = beta;
  };
  if (id == "1") {
    tandem(0.1, {0.45, 0.45});
    c.n_values = {20};
    c.epsilon = 0.02;
  } else if (id == "2") {
    tandem(0.1, {0.45, 0.45});
    c.n_values = {30, 40, 50};
    c.epsilon = 0.02;
  } else if (id == "4") {
    tandem(0.1, {0.5, 0.4});
    c.target_kind = TargetSet::Kind::IndividualBuffers;
    c.bounds = {0.9, 1.0};
    c.n_values = {20, 30, 40};
    c.epsilon = 0.01;
  } else if (id == "5") {
    tandem(0.05, {0.35, 0.6});
    c.target_kind = TargetSet::Kind::IndividualBuffers;
    c.bounds = {1.0, 0.6};
    c.n_values = {20, 30, 40};
    c.epsilon = 0.1;
  } else if (id == "6") {
    tandem(0.04, {0.24, 0.24, 0.24, 0.24});
    c.n_values = {20, 25, 30};
    c.epsilon = 0.1;
  } else if (id == "7") {
    tandem(0.01, std::vector<double>(9, 0.11));
    c.n_values = {20, 25, 30};
    c.epsilon = 0.12;
    c.replications = 100'000;
    c.exact = false;  // the enumeration is far beyond the state cap here
  } else if (id == "8") {
    feedback(0.1, 0.5, 0.4, 0.1);
    c.n_values = {20, 30, 40};
    c.epsilon = 0.02;
  } else if (id == "9") {
    feedback(0.1, 0.43, 0.47, 0.2);
    c.n_values = {20, 30, 40};
    c.epsilon = 0.02;
  } else {
    config_fail("unknown table id '" + id + "' (expected one of 1,2,4,5,6,7,8,9)");
  }
  return c;
}

std::vector<std::string> table_ids() { return {"1", "2", "4", "5", "6", "7", "8", "9"}; }

RunOutput run_experiment(const ExperimentConfig& config) {
  const NetworkModel model = config.model.build();
  const TargetSet target = config.target();
  const double gamma = analytic_decay_rate(model, target);

  RunOutput output;
  output.config = config;
  for (std::int64_t n : config.n_values) {
    RunRow row;
    row.n = n;
    row.kernel = config.kernel;
    row.replications = config.replications;
    row.seed = config.seed;
    row.analytic_gamma = gamma;

    const auto kernel = build_kernel(config, model, target, n);
    EstimateOptions opts;
    opts.workers = config.workers;
    const auto t0 = std::chrono::steady_clock::now();
    row.stats = estimate(model, target, n, *kernel, config.replications, config.seed, opts);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (config.exact) {
      try {
        row.exact_value = exact_probability(model, target, n).probability;
      } catch (const OracleInfeasible&) {
        row.exact_value.reset();
      }
    }
    output.rows.push_back(std::move(row));
  }
  return output;
}

RunOutput run_exact(const ExperimentConfig& config) {
  const NetworkModel model = config.model.build();
  const TargetSet target = config.target();
  const double gamma = analytic_decay_rate(model, target);

  RunOutput output;
  output.config = config;
  for (std::int64_t n : config.n_values) {
    RunRow row;
    row.n = n;
    row.kernel = "exact";
    row.replications = 0;
    row.seed = config.seed;
    row.analytic_gamma = gamma;
    const auto t0 = std::chrono::steady_clock::now();
    row.exact_value = exact_probability(model, target, n).probability;
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    output.rows.push_back(std::move(row));
  }
  return output;
}

void write_csv(const RunOutput& output, std::ostream& os) {
  os << "# config " << output.config.to_json_text() << '\n';
  os << "n,kernel,estimate,std_err,ci95_low,ci95_high,exact_value,"
        "empirical_decay_rate,analytic_gamma,replications,seed\n";
  for (const auto& row : output.rows) {
    os << row.n << ',' << row.kernel << ',';
    if (row.stats) {
      os << format_sci(row.stats->mean) << ',' << format_sci(row.stats->std_err) << ','
         << format_sci(row.stats->ci95_low) << ',' << format_sci(row.stats->ci95_high);
    } else {
      os << ",,,";
    }
    os << ',' << format_opt(row.exact_value) << ',';
    if (row.stats) os << format_opt(row.stats->empirical_decay_rate);
    os << ',' << format_sci(row.analytic_gamma) << ',' << row.replications << ','
       << row.seed << '\n';
  }
}

std::string to_csv(const RunOutput& output) {
  std::ostringstream os;
  write_csv(output, os);
  return os.str();
}

std::string summary_json(const RunOutput& output) {
  json rows = json::array();
  for (const auto& row : output.rows) {
    json r = {{"n", row.n},
              {"kernel", row.kernel},
              {"analytic_gamma", row.analytic_gamma},
              {"wall_time_s", row.wall_seconds},
              {"replications", row.replications},
              {"seed", row.seed}};
    if (row.stats) {
      r["estimate"] = row.stats->mean;
      r["std_err"] = row.stats->std_err;
      r["ci95_low"] = row.stats->ci95_low;
      r["ci95_high"] = row.stats->ci95_high;
      r["second_moment"] = row.stats->second_moment;
      r["hit_count"] = row.stats->hit_count;
      if (row.stats->empirical_decay_rate)
        r["empirical_decay_rate"] = *row.stats->empirical_decay_rate;
    }
    if (row.exact_value) r["exact_value"] = *row.exact_value;
    rows.push_back(std::move(r));
  }
  json j = {{"config", json::parse(output.config.to_json_text())}, {"rows", rows}};
  return j.dump(2);
}

ExperimentConfig config_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  const std::string prefix = "# config ";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0)
      return ExperimentConfig::from_json_text(line.substr(prefix.size()));
  }
  config_fail("CSV has no '# config' metadata line");
}

namespace {

// keeps the barycentric grid around 2.5e5 points regardless of event count
int clamp_resolution(int events, int requested) {
  int best = 10;
  for (int r = 10; r <= requested; ++r) {
    double points = 1.0;
    for (int i = 1; i <= events - 1; ++i)
      points *= static_cast<double>(r - 1 - (i - 1)) / i;
    if (points > 250'000.0) break;
    best = r;
  }
  return best;
}

json saddle_check_json(const NetworkModel& model, std::span<const double> p,
                       int resolution) {
  const SaddleCheck check = verify_saddle(model, p, resolution);
  return {{"p", std::vector<double>(p.begin(), p.end())},
          {"numeric_inf", check.numeric_inf},
          {"analytic", check.analytic},
          {"gap", check.gap},
          {"attained", check.attained},
          {"resolution", check.resolution}};
}

}  // namespace

std::string run_verification(const ExperimentConfig& config, const VerifyOptions& options) {
  const NetworkModel model = config.model.build();
  const TargetSet target = config.target();
  const double epsilon = config.epsilon;
  const double delta = config.delta_value();
  const SubsolutionSpec spec = build_spec(model, target, epsilon, delta, config.bounds);

  const VerificationReport report =
      verify_subsolution(spec, model, target, options.sample_count, config.seed);

  const int resolution = clamp_resolution(model.event_count(), options.saddle_resolution);
  json saddle = json::array();
  for (const auto& piece : spec.pieces)
    saddle.push_back(saddle_check_json(model, piece.gradient, resolution));
  SplitMix64 rng(SplitMix64::mix(config.seed ^ 0x5EEDFACEULL));
  for (int i = 0; i < options.random_gradients; ++i) {
    std::vector<double> p(model.dimension());
    for (double& v : p) v = -6.0 + 12.0 * rng.next_double();
    saddle.push_back(saddle_check_json(model, p, resolution));
  }

  json j = {{"config", json::parse(config.to_json_text())},
            {"subsolution", json::parse(report.to_json())},
            {"saddle", saddle}};
  return j.dump(2);
}

}  // namespace qnis
