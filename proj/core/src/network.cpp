#include "qnis/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qnis {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

NetworkModel NetworkModel::tandem(int d, double lambda, std::span<const double> mu) {
  require(d >= 1, "tandem: need at least one node");
  require(static_cast<int>(mu.size()) == d, "tandem: mu must have one rate per node");
  require(lambda > 0.0, "tandem: arrival rate must be positive");
  double mu_min = mu[0];
  for (double m : mu) {
    require(m > 0.0, "tandem: service rates must be positive");
    mu_min = std::min(mu_min, m);
  }
  require(lambda < mu_min,
          "tandem: unstable parameters, need lambda < min mu (lambda=" +
              std::to_string(lambda) + ", min mu=" + std::to_string(mu_min) + ")");

  NetworkModel model;
  model.kind_ = NetworkKind::Tandem;
  model.basis_.dimension = d;
  model.basis_.events.reserve(d + 1);
  std::vector<int> v0(d, 0);
  v0[0] = 1;
  model.basis_.events.push_back(std::move(v0));
  for (int i = 1; i <= d; ++i) {
    std::vector<int> v(d, 0);
    v[i - 1] = -1;
    if (i < d) v[i] = 1;
    model.basis_.events.push_back(std::move(v));
  }

  model.raw_rates_.assign(1, lambda);
  model.raw_rates_.insert(model.raw_rates_.end(), mu.begin(), mu.end());
  model.rate_scale_ = std::accumulate(model.raw_rates_.begin(), model.raw_rates_.end(), 0.0);
  model.theta_.resize(model.raw_rates_.size());
  for (std::size_t i = 0; i < model.theta_.size(); ++i)
    model.theta_[i] = model.raw_rates_[i] / model.rate_scale_;

  model.blocked_.assign(d + 1, -1);
  for (int i = 1; i <= d; ++i) model.blocked_[i] = i - 1;

  model.pop_delta_.resize(d + 1);
  for (int e = 0; e <= d; ++e)
    model.pop_delta_[e] =
        std::accumulate(model.basis_.events[e].begin(), model.basis_.events[e].end(), 0);
  return model;
}

NetworkModel NetworkModel::feedback(double lambda, double mu1, double mu2, double beta) {
  require(lambda > 0.0 && mu1 > 0.0 && mu2 > 0.0, "feedback: rates must be positive");
  require(beta > 0.0 && beta < 1.0,
          "feedback: beta must lie strictly between 0 and 1 (got " + std::to_string(beta) + ")");
  const double mu_min = std::min(mu1, mu2);
  require(lambda < mu_min * (1.0 - beta),
          "feedback: unstable parameters, need lambda < min(mu1,mu2)*(1-beta)");

  NetworkModel model;
  model.kind_ = NetworkKind::Feedback;
  model.basis_.dimension = 2;
  model.basis_.events = {{1, 0}, {-1, 1}, {0, -1}, {1, -1}};
  model.beta_ = beta;

  model.raw_rates_ = {lambda, mu1, mu2};
  model.rate_scale_ = lambda + mu1 + mu2;
  const double s = model.rate_scale_;
  model.theta_ = {lambda / s, mu1 / s, (1.0 - beta) * mu2 / s, beta * mu2 / s};

  // v_1 needs queue 1 nonempty; v_2 and v_3 both drain queue 2
  model.blocked_ = {-1, 0, 1, 1};
  model.pop_delta_ = {1, 0, -1, 0};
  return model;
}

double NetworkModel::service_rate(int node) const {
  if (kind_ == NetworkKind::Tandem) return theta_[node + 1];
  return node == 0 ? theta_[1] : theta_[2] + theta_[3];
}

double NetworkModel::min_service_rate() const {
  double m = service_rate(0);
  for (int i = 1; i < dimension(); ++i) m = std::min(m, service_rate(i));
  return m;
}

double NetworkModel::feedback_probability() const {
  if (kind_ != NetworkKind::Feedback)
    throw std::invalid_argument("feedback_probability: tandem model has no feedback");
  return beta_;
}

void NetworkModel::apply_step(State& z, int e) const {
  if (blocked_at(z, e)) return;
  const auto& v = basis_.events[e];
  for (int i = 0; i < basis_.dimension; ++i) z[i] += v[i];
}

State NetworkModel::step(State z, int e) const {
  apply_step(z, e);
  return z;
}

TargetSet TargetSet::total_population() { return TargetSet(Kind::TotalPopulation, {}); }

TargetSet TargetSet::individual_buffers(std::vector<double> bounds) {
  if (bounds.empty()) throw std::invalid_argument("individual_buffers: empty bounds");
  for (double b : bounds)
    if (!(b > 0.0)) throw std::invalid_argument("individual_buffers: bounds must be positive");
  return TargetSet(Kind::IndividualBuffers, std::move(bounds));
}

bool TargetSet::contains(std::span<const double> x) const {
  if (kind_ == Kind::TotalPopulation) {
    double total = 0.0;
    for (double xi : x) total += xi;
    return total >= 1.0;
  }
  for (std::size_t i = 0; i < bounds_.size(); ++i)
    if (x[i] >= bounds_[i]) return true;
  return false;
}

std::vector<std::int64_t> TargetSet::lattice_thresholds(int dimension, std::int64_t n) const {
  if (kind_ == Kind::TotalPopulation) return {};
  if (static_cast<int>(bounds_.size()) != dimension)
    throw std::invalid_argument("target bounds dimension does not match the model");
  std::vector<std::int64_t> t(bounds_.size());
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    // smallest integer k with k >= B*n; the slack absorbs roundoff in B*n
    // (e.g. 0.9*20 evaluating to 18.000000000000004)
    t[i] = static_cast<std::int64_t>(std::ceil(bounds_[i] * static_cast<double>(n) - 1e-9));
    t[i] = std::max<std::int64_t>(t[i], 1);
  }
  return t;
}

LatticeTarget::LatticeTarget(const TargetSet& target, int dimension, std::int64_t n)
    : kind_(target.kind()), n_(n), thresholds_(target.lattice_thresholds(dimension, n)) {
  if (n < 1) throw std::invalid_argument("scale n must be at least 1");
}

bool LatticeTarget::hit(std::span<const std::int64_t> z, std::int64_t total) const {
  if (kind_ == TargetSet::Kind::TotalPopulation) return total >= n_;
  for (std::size_t i = 0; i < thresholds_.size(); ++i)
    if (z[i] >= thresholds_[i]) return true;
  return false;
}

}  // namespace qnis
