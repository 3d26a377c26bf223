#include "qnis/subsolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

#include "qnis/hamiltonian.hpp"

namespace qnis {

namespace {

constexpr double kSlackTol = 1e-10;
constexpr double kSandwichTol = 1e-12;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_mollifier_params(double epsilon, double delta) {
  require(epsilon > 0.0, "subsolution: epsilon must be positive");
  require(delta > 0.0, "subsolution: delta must be positive");
}

void piece_values(const SubsolutionSpec& spec, std::span<const double> x,
                  std::vector<double>& out) {
  const int k_count = spec.piece_count();
  out.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    const auto& piece = spec.pieces[k];
    double v = piece.offset;
    for (std::size_t i = 0; i < piece.gradient.size(); ++i) v += piece.gradient[i] * x[i];
    out[k] = v;
  }
}

// softmax of -values/eps with max shift; exponents of size delta/eps can reach
// hundreds, so the shift is not optional
void softmax_weights(const std::vector<double>& values, double epsilon,
                     std::vector<double>& rho) {
  const std::size_t k_count = values.size();
  rho.resize(k_count);
  double s_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < k_count; ++k) {
    rho[k] = -values[k] / epsilon;
    s_max = std::max(s_max, rho[k]);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    rho[k] = std::exp(rho[k] - s_max);
    total += rho[k];
  }
  for (double& w : rho) w /= total;
}

double normalized_mu_min(const NetworkModel& model) {
  return model.min_service_rate();
}

}  // namespace

double auto_delta(double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, "auto_delta: need 0 < epsilon < 1");
  return -epsilon * std::log(epsilon);
}

SubsolutionSpec build_tandem_total(const NetworkModel& model, double epsilon,
                                   double delta) {
  require(model.kind() == NetworkKind::Tandem,
          "build_tandem_total: model is not a tandem network");
  check_mollifier_params(epsilon, delta);

  const int d = model.dimension();
  const double gamma = std::log(normalized_mu_min(model) / model.arrival_rate());

  SubsolutionSpec spec;
  spec.problem = SubsolutionProblem::TandemTotal;
  spec.gamma = gamma;
  spec.epsilon = epsilon;
  spec.delta = delta;
  spec.pieces.reserve(d + 1);
  for (int k = 1; k <= d + 1; ++k) {
    AffinePiece piece;
    piece.gradient.assign(d, 0.0);
    for (int i = 0; i < d + 1 - k; ++i) piece.gradient[i] = -2.0 * gamma;
    piece.offset = 2.0 * gamma - k * delta;
    spec.pieces.push_back(std::move(piece));
  }
  return spec;
}

SubsolutionSpec build_individual_buffer(const NetworkModel& model,
                                        std::span<const double> bounds,
                                        double epsilon, double delta) {
  require(model.kind() == NetworkKind::Tandem && model.dimension() == 2,
          "build_individual_buffer: construction is stated only for two-node "
          "tandem networks");
  require(bounds.size() == 2, "build_individual_buffer: need two buffer bounds");
  require(bounds[0] > 0.0 && bounds[1] > 0.0,
          "build_individual_buffer: bounds must be positive");
  check_mollifier_params(epsilon, delta);

  const double lambda = model.arrival_rate();
  const double mu1 = model.service_rate(0);
  const double mu2 = model.service_rate(1);
  const double gamma =
      std::min(bounds[0] * std::log(mu1 / lambda), bounds[1] * std::log(mu2 / lambda));

  SubsolutionSpec spec;
  spec.problem = SubsolutionProblem::IndividualBuffer;
  spec.gamma = gamma;
  spec.epsilon = epsilon;
  spec.delta = delta;
  spec.pieces.resize(3);
  if (mu1 >= mu2) {
    const double g2 = 2.0 * std::log(mu2 / lambda);
    spec.pieces[0].gradient = {-g2, -g2};
  } else {
    spec.pieces[0].gradient = {-2.0 * std::log(mu1 / lambda),
                               -2.0 * std::log(mu2 / lambda)};
  }
  spec.pieces[1].gradient = {-2.0 * std::log(mu1 / lambda), 0.0};
  spec.pieces[2].gradient = {0.0, 0.0};
  for (int k = 0; k < 3; ++k) spec.pieces[k].offset = 2.0 * gamma - (k + 1) * delta;
  return spec;
}

SubsolutionSpec build_feedback_total(const NetworkModel& model, double epsilon,
                                     double delta) {
  require(model.kind() == NetworkKind::Feedback,
          "build_feedback_total: model is not a feedback network");
  check_mollifier_params(epsilon, delta);

  const double lambda = model.arrival_rate();
  const double mu1 = model.service_rate(0);
  const double mu2 = model.service_rate(1);
  const double beta = model.feedback_probability();
  const double gamma = std::log((1.0 - beta) * std::min(mu1, mu2) / lambda);

  const double a = (mu1 >= mu2)
                       ? std::log(mu1 / (mu1 + lambda - (1.0 - beta) * mu2))
                       : std::log(mu1 / (lambda + beta * mu1));
  if (!(a > 0.0))
    throw std::invalid_argument(
        "build_feedback_total: degenerate parameters give a <= 0 (a=" +
        std::to_string(a) + ")");

  SubsolutionSpec spec;
  spec.problem = SubsolutionProblem::FeedbackTotal;
  spec.gamma = gamma;
  spec.epsilon = epsilon;
  spec.delta = delta;
  spec.pieces.resize(3);
  spec.pieces[0].gradient = {-2.0 * gamma, -2.0 * gamma};
  spec.pieces[0].offset = 2.0 * gamma - delta;
  spec.pieces[1].gradient = {-2.0 * gamma, -2.0 * (gamma - a)};
  spec.pieces[1].offset = 2.0 * gamma - 2.0 * delta;
  spec.pieces[2].gradient = {0.0, 0.0};
  spec.pieces[2].offset = 2.0 * gamma - (1.0 + 2.0 * gamma / a) * delta;
  return spec;
}

double analytic_decay_rate(const NetworkModel& model, const TargetSet& target) {
  const double lambda = model.arrival_rate();
  if (target.kind() == TargetSet::Kind::TotalPopulation) {
    if (model.kind() == NetworkKind::Tandem)
      return std::log(normalized_mu_min(model) / lambda);
    const double mu_min = std::min(model.service_rate(0), model.service_rate(1));
    return std::log((1.0 - model.feedback_probability()) * mu_min / lambda);
  }
  require(model.kind() == NetworkKind::Tandem && model.dimension() == 2,
          "analytic_decay_rate: individual buffers are supported for two-node "
          "tandem networks only");
  const auto& b = target.bounds();
  return std::min(b[0] * std::log(model.service_rate(0) / lambda),
                  b[1] * std::log(model.service_rate(1) / lambda));
}

double evaluate_piecewise(const SubsolutionSpec& spec, std::span<const double> x) {
  std::vector<double> values;
  piece_values(spec, x, values);
  return *std::min_element(values.begin(), values.end());
}

double mollified_value(const SubsolutionSpec& spec, std::span<const double> x) {
  std::vector<double> values;
  piece_values(spec, x, values);
  double s_max = -std::numeric_limits<double>::infinity();
  for (double v : values) s_max = std::max(s_max, -v / spec.epsilon);
  double total = 0.0;
  for (double v : values) total += std::exp(-v / spec.epsilon - s_max);
  return -spec.epsilon * (s_max + std::log(total));
}

std::vector<double> mollified_weights(const SubsolutionSpec& spec,
                                      std::span<const double> x) {
  std::vector<double> values, rho;
  piece_values(spec, x, values);
  softmax_weights(values, spec.epsilon, rho);
  return rho;
}

std::vector<double> mollified_gradient(const SubsolutionSpec& spec,
                                       std::span<const double> x) {
  const auto rho = mollified_weights(spec, x);
  std::vector<double> g(spec.dimension(), 0.0);
  for (int k = 0; k < spec.piece_count(); ++k)
    for (int i = 0; i < spec.dimension(); ++i) g[i] += rho[k] * spec.pieces[k].gradient[i];
  return g;
}

namespace {

// Halton radical inverse; deterministic low-discrepancy driver for the
// verification samples
double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
constexpr int kBoundaryGrid = 200;

// uniform point in the corner simplex {x >= 0, sum x <= limit} via d+1
// exponential spacings
std::vector<double> simplex_point(std::uint64_t index, double limit, int dim) {
  std::vector<double> e(dim + 1);
  double total = 0.0;
  for (int j = 0; j <= dim; ++j) {
    const double u = halton(index, kPrimes[j]);
    e[j] = -std::log1p(-std::min(u, 1.0 - 1e-16));
    total += e[j];
  }
  if (total <= 0.0) total = 1.0;
  std::vector<double> x(dim);
  for (int i = 0; i < dim; ++i) x[i] = limit * e[i + 1] / total;
  return x;
}

// uniform point on the face {sum x = limit}
std::vector<double> simplex_face_point(std::uint64_t index, double limit, int dim) {
  std::vector<double> e(dim);
  double total = 0.0;
  for (int j = 0; j < dim; ++j) {
    const double u = halton(index, kPrimes[j]);
    e[j] = -std::log1p(-std::min(u, 1.0 - 1e-16));
    total += e[j];
  }
  if (total <= 0.0) total = 1.0;
  for (double& v : e) v *= limit / total;
  return e;
}

struct SamplePlan {
  std::vector<std::vector<double>> interior;
  std::vector<std::vector<double>> exit;
  std::vector<std::vector<std::vector<double>>> boundary;  // per coordinate
};

SamplePlan plan_total_population(int dim, int sample_count, std::uint64_t seed) {
  SamplePlan plan;
  const std::uint64_t skip = 1 + (seed % 8192);
  for (int s = 0; s < sample_count; ++s)
    plan.interior.push_back(simplex_point(skip + s, 1.0, dim));

  if (dim == 2) {
    for (int j = 0; j < kBoundaryGrid; ++j) {
      const double t = static_cast<double>(j) / (kBoundaryGrid - 1);
      plan.exit.push_back({t, 1.0 - t});
    }
  } else {
    for (int s = 0; s < kBoundaryGrid; ++s)
      plan.exit.push_back(simplex_face_point(skip + s, 1.0, dim));
    for (int i = 0; i < dim; ++i) {
      std::vector<double> vertex(dim, 0.0);
      vertex[i] = 1.0;
      plan.exit.push_back(std::move(vertex));
    }
  }

  plan.boundary.resize(dim);
  for (int i = 0; i < dim; ++i) {
    auto& pts = plan.boundary[i];
    if (dim == 2) {
      const int other = 1 - i;
      for (int j = 0; j < kBoundaryGrid; ++j) {
        std::vector<double> x(2, 0.0);
        x[other] = static_cast<double>(j) / (kBoundaryGrid - 1);
        pts.push_back(std::move(x));
      }
    } else {
      for (int s = 0; s < kBoundaryGrid; ++s) {
        const auto facet = simplex_point(skip + s, 1.0, dim - 1);
        std::vector<double> x(dim, 0.0);
        int j = 0;
        for (int c = 0; c < dim; ++c)
          if (c != i) x[c] = facet[j++];
        pts.push_back(std::move(x));
      }
      pts.push_back(std::vector<double>(dim, 0.0));  // corner at the origin
    }
  }
  return plan;
}

SamplePlan plan_individual_buffers(std::span<const double> bounds, int sample_count,
                                   std::uint64_t seed) {
  SamplePlan plan;
  const std::uint64_t skip = 1 + (seed % 8192);
  const double b1 = bounds[0], b2 = bounds[1];
  for (int s = 0; s < sample_count; ++s) {
    const std::uint64_t idx = skip + s;
    plan.interior.push_back({b1 * halton(idx, 2), b2 * halton(idx, 3)});
  }
  for (int j = 0; j < kBoundaryGrid; ++j) {
    const double t = static_cast<double>(j) / (kBoundaryGrid - 1);
    plan.exit.push_back({b1, t * b2});
    plan.exit.push_back({t * b1, b2});
  }
  plan.boundary.resize(2);
  for (int j = 0; j < kBoundaryGrid; ++j) {
    const double t = static_cast<double>(j) / (kBoundaryGrid - 1);
    plan.boundary[0].push_back({0.0, t * b2});
    plan.boundary[1].push_back({t * b1, 0.0});
  }
  return plan;
}

const char* problem_name(SubsolutionProblem problem) {
  switch (problem) {
    case SubsolutionProblem::TandemTotal: return "tandem_total";
    case SubsolutionProblem::IndividualBuffer: return "individual_buffer";
    case SubsolutionProblem::FeedbackTotal: return "feedback_total";
  }
  return "unknown";
}

}  // namespace

VerificationReport verify_subsolution(const SubsolutionSpec& spec,
                                      const NetworkModel& model,
                                      const TargetSet& target, int sample_count,
                                      std::uint64_t seed) {
  require(spec.dimension() == model.dimension(),
          "verify_subsolution: spec dimension does not match the model");
  const bool buffers = spec.problem == SubsolutionProblem::IndividualBuffer;
  require(buffers == (target.kind() == TargetSet::Kind::IndividualBuffers),
          "verify_subsolution: spec and target describe different overflow sets");
  require((spec.problem == SubsolutionProblem::FeedbackTotal) ==
              (model.kind() == NetworkKind::Feedback),
          "verify_subsolution: spec and model kinds disagree");
  require(sample_count > 0, "verify_subsolution: sample count must be positive");

  const int dim = model.dimension();
  const int k_count = spec.piece_count();
  const bool feedback = model.kind() == NetworkKind::Feedback;

  VerificationReport report;
  report.problem = problem_name(spec.problem);
  report.gamma = spec.gamma;
  report.epsilon = spec.epsilon;
  report.delta = spec.delta;

  for (const auto& piece : spec.pieces)
    report.piece_hamiltonians.push_back(hamiltonian(model, piece.gradient));
  report.min_piece_hamiltonian = *std::min_element(report.piece_hamiltonians.begin(),
                                                   report.piece_hamiltonians.end());
  if (feedback) {
    for (int b = 1; b <= 2; ++b) {
      std::vector<double> h;
      for (const auto& piece : spec.pieces)
        h.push_back(boundary_hamiltonian(model, b, piece.gradient));
      report.boundary_piece_hamiltonians.push_back(std::move(h));
    }
  }

  const SamplePlan plan =
      buffers ? plan_individual_buffers(target.bounds(), sample_count, seed)
              : plan_total_population(dim, sample_count, seed);

  report.min_sandwich_gap = std::numeric_limits<double>::infinity();
  report.max_sandwich_gap = -std::numeric_limits<double>::infinity();
  auto track_sandwich = [&](std::span<const double> x) {
    const double gap = evaluate_piecewise(spec, x) - mollified_value(spec, x);
    report.min_sandwich_gap = std::min(report.min_sandwich_gap, gap);
    report.max_sandwich_gap = std::max(report.max_sandwich_gap, gap);
  };

  report.interior_samples = static_cast<int>(plan.interior.size());
  report.min_interior_hamiltonian = std::numeric_limits<double>::infinity();
  for (const auto& x : plan.interior) {
    const auto g = mollified_gradient(spec, x);
    report.min_interior_hamiltonian =
        std::min(report.min_interior_hamiltonian, hamiltonian(model, g));
    track_sandwich(x);
  }

  report.exit_samples = static_cast<int>(plan.exit.size());
  report.max_exit_value = -std::numeric_limits<double>::infinity();
  for (const auto& x : plan.exit) {
    report.max_exit_value = std::max(report.max_exit_value, mollified_value(spec, x));
    track_sandwich(x);
  }

  const double damping = std::exp(-spec.delta / spec.epsilon);
  for (int c = 0; c < dim; ++c) {
    BoundaryCheck check;
    check.boundary = c + 1;
    check.samples = static_cast<int>(plan.boundary[c].size());
    check.min_slack = std::numeric_limits<double>::infinity();

    if (feedback) {
      const auto& h_pieces = report.boundary_piece_hamiltonians[c];
      double worst = 0.0;
      for (double h : h_pieces) worst = std::max(worst, std::abs(h));
      check.cbar = 2.0 * worst;
      check.floor = -check.cbar * damping;
      for (const auto& x : plan.boundary[c]) {
        const auto rho = mollified_weights(spec, x);
        double mix = 0.0;
        double violating = 0.0;
        for (int k = 0; k < k_count; ++k) {
          mix += rho[k] * h_pieces[k];
          // pieces sitting exactly on H = 0 carry roundoff; only genuinely
          // negative ones count as violators
          if (h_pieces[k] < -1e-12) violating = std::max(violating, rho[k]);
        }
        check.min_slack = std::min(check.min_slack, mix);
        check.max_violating_weight = std::max(check.max_violating_weight, violating);
        track_sandwich(x);
      }
    } else {
      // Neumann direction d_i = -v_i for the service event at this node
      std::vector<double> direction(dim, 0.0);
      const auto& v = model.event(c + 1);
      for (int i = 0; i < dim; ++i) direction[i] = -v[i];
      double slope = 0.0;  // total violating slope over pieces
      std::vector<char> violates(k_count, 0);
      for (int k = 0; k < k_count; ++k) {
        double rd = 0.0;
        for (int i = 0; i < dim; ++i) rd += spec.pieces[k].gradient[i] * direction[i];
        if (rd < 0.0) {
          slope += -rd;
          violates[k] = 1;
        }
      }
      check.floor = -slope * damping;
      for (const auto& x : plan.boundary[c]) {
        const auto rho = mollified_weights(spec, x);
        const auto g = mollified_gradient(spec, x);
        double slack = 0.0;
        for (int i = 0; i < dim; ++i) slack += g[i] * direction[i];
        check.min_slack = std::min(check.min_slack, slack);
        for (int k = 0; k < k_count; ++k)
          if (violates[k])
            check.max_violating_weight = std::max(check.max_violating_weight, rho[k]);
        track_sandwich(x);
      }
    }
    check.ok = check.min_slack >= check.floor - kSlackTol;
    report.boundaries.push_back(std::move(check));
  }

  const double k_eps = k_count * spec.epsilon;
  report.all_ok = report.min_piece_hamiltonian >= -kSlackTol &&
                  report.min_interior_hamiltonian >= -kSlackTol &&
                  report.max_exit_value <= kSandwichTol &&
                  report.min_sandwich_gap >= -kSandwichTol &&
                  report.max_sandwich_gap <= k_eps + kSandwichTol;
  for (const auto& check : report.boundaries) report.all_ok = report.all_ok && check.ok;
  return report;
}

std::string VerificationReport::to_json() const {
  nlohmann::json j;
  j["problem"] = problem;
  j["gamma"] = gamma;
  j["epsilon"] = epsilon;
  j["delta"] = delta;
  j["piece_hamiltonians"] = piece_hamiltonians;
  if (!boundary_piece_hamiltonians.empty())
    j["boundary_piece_hamiltonians"] = boundary_piece_hamiltonians;
  j["min_piece_hamiltonian"] = min_piece_hamiltonian;
  j["interior_samples"] = interior_samples;
  j["min_interior_hamiltonian"] = min_interior_hamiltonian;
  j["exit_samples"] = exit_samples;
  j["max_exit_value"] = max_exit_value;
  j["min_sandwich_gap"] = min_sandwich_gap;
  j["max_sandwich_gap"] = max_sandwich_gap;
  j["boundaries"] = nlohmann::json::array();
  for (const auto& check : boundaries) {
    nlohmann::json b;
    b["boundary"] = check.boundary;
    b["samples"] = check.samples;
    b["min_slack"] = check.min_slack;
    b["floor"] = check.floor;
    b["cbar"] = check.cbar;
    b["max_violating_weight"] = check.max_violating_weight;
    b["ok"] = check.ok;
    j["boundaries"].push_back(std::move(b));
  }
  j["all_ok"] = all_ok;
  return j.dump(2);
}

}  // namespace qnis
