#include "qnis/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qnis {

namespace {

void check_event_dim(const NetworkModel& model, std::span<const double> v,
                     const char* what) {
  if (static_cast<int>(v.size()) != model.event_count())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch with event set");
}

void check_state_dim(const NetworkModel& model, std::span<const double> p) {
  if (static_cast<int>(p.size()) != model.dimension())
    throw std::invalid_argument("gradient dimension does not match the model");
}

double dot_event(std::span<const double> p, const std::vector<int>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += p[i] * v[i];
  return s;
}

// log sum_i theta_i exp(a_i), max-shifted
double log_weighted_sum_exp(const NetworkModel& model, std::span<const double> p,
                            int drop_boundary) {
  const int m = model.event_count();
  double a_max = -std::numeric_limits<double>::infinity();
  std::vector<double> a(m);
  for (int e = 0; e < m; ++e) {
    const bool dropped =
        drop_boundary >= 0 && model.blocking_coordinate(e) == drop_boundary;
    a[e] = dropped ? 0.0 : -0.5 * dot_event(p, model.event(e));
    a_max = std::max(a_max, a[e]);
  }
  double s = 0.0;
  for (int e = 0; e < m; ++e) s += model.theta(e) * std::exp(a[e] - a_max);
  return a_max + std::log(s);
}

std::vector<double> tilted_distribution(const NetworkModel& model,
                                        std::span<const double> p, int drop_boundary) {
  check_state_dim(model, p);
  const int m = model.event_count();
  std::vector<double> a(m);
  double a_max = -std::numeric_limits<double>::infinity();
  for (int e = 0; e < m; ++e) {
    const bool dropped =
        drop_boundary >= 0 && model.blocking_coordinate(e) == drop_boundary;
    a[e] = std::log(model.theta(e)) +
           (dropped ? 0.0 : -0.5 * dot_event(p, model.event(e)));
    a_max = std::max(a_max, a[e]);
  }
  std::vector<double> out(m);
  double s = 0.0;
  for (int e = 0; e < m; ++e) {
    out[e] = std::exp(a[e] - a_max);
    s += out[e];
  }
  for (double& x : out) x /= s;
  return out;
}

void check_feedback_boundary(const NetworkModel& model, int boundary) {
  if (model.kind() != NetworkKind::Feedback)
    throw std::invalid_argument(
        "boundary Hamiltonian is defined only for the feedback model "
        "(tandem boundaries use the Neumann inequality)");
  if (boundary != 1 && boundary != 2)
    throw std::invalid_argument("boundary index must be 1 or 2");
}

}  // namespace

std::vector<double> drift(const NetworkModel& model, std::span<const double> theta) {
  check_event_dim(model, theta, "drift");
  std::vector<double> f(model.dimension(), 0.0);
  for (int e = 0; e < model.event_count(); ++e) {
    const auto& v = model.event(e);
    for (int i = 0; i < model.dimension(); ++i) f[i] += theta[e] * v[i];
  }
  return f;
}

double relative_entropy(std::span<const double> theta, std::span<const double> ref) {
  if (theta.size() != ref.size())
    throw std::invalid_argument("relative_entropy: distributions over different event sets");
  double r = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] == 0.0) continue;
    if (ref[i] == 0.0) return std::numeric_limits<double>::infinity();
    r += theta[i] * std::log(theta[i] / ref[i]);
  }
  return r;
}

std::vector<double> saddle_change_of_measure(const NetworkModel& model,
                                             std::span<const double> p) {
  return tilted_distribution(model, p, -1);
}

double hamiltonian(const NetworkModel& model, std::span<const double> p) {
  check_state_dim(model, p);
  return -2.0 * log_weighted_sum_exp(model, p, -1);
}

double boundary_hamiltonian(const NetworkModel& model, int boundary,
                            std::span<const double> p) {
  check_feedback_boundary(model, boundary);
  check_state_dim(model, p);
  return -2.0 * log_weighted_sum_exp(model, p, boundary - 1);
}

std::vector<double> boundary_change_of_measure(const NetworkModel& model, int boundary,
                                               std::span<const double> p) {
  check_feedback_boundary(model, boundary);
  return tilted_distribution(model, p, boundary - 1);
}

double saddle_objective(const NetworkModel& model, std::span<const double> p,
                        std::span<const double> theta) {
  check_event_dim(model, theta, "saddle_objective");
  const auto f = drift(model, theta);
  double value = 0.0;
  for (int i = 0; i < model.dimension(); ++i) value += p[i] * f[i];
  return value + 2.0 * relative_entropy(theta, model.theta());
}

SaddleCheck verify_saddle(const NetworkModel& model, std::span<const double> p,
                          int resolution) {
  check_state_dim(model, p);
  if (resolution < 10) throw std::invalid_argument("verify_saddle: resolution must be >= 10");

  const int m = model.event_count();
  SaddleCheck check;
  check.resolution = resolution;
  check.analytic = hamiltonian(model, p);
  const auto minimizer = saddle_change_of_measure(model, p);
  check.attained = saddle_objective(model, p, minimizer);
  check.numeric_inf = std::numeric_limits<double>::infinity();

  // barycentric lattice with strictly positive parts (R is finite only on the
  // full support)
  std::vector<int> parts(m, 1);
  std::vector<double> theta(m);
  const double inv = 1.0 / resolution;
  auto evaluate = [&]() {
    for (int e = 0; e < m; ++e) theta[e] = parts[e] * inv;
    const double value = saddle_objective(model, p, theta);
    if (value < check.numeric_inf) {
      check.numeric_inf = value;
      check.argmin = theta;
    }
  };
  // enumerate compositions of `resolution` into m positive parts
  auto recurse = [&](auto&& self, int event, int remaining) -> void {
    if (event == m - 1) {
      parts[event] = remaining;
      evaluate();
      return;
    }
    const int slots_after = m - 1 - event;
    for (int c = 1; c <= remaining - slots_after; ++c) {
      parts[event] = c;
      self(self, event + 1, remaining - c);
    }
  };
  recurse(recurse, 0, resolution);

  check.gap = check.numeric_inf - check.analytic;
  return check;
}

}  // namespace qnis
