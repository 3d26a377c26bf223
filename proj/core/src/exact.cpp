#include "qnis/exact.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "qnis/subsolution.hpp"

namespace qnis {

namespace {

constexpr std::int32_t kHit = -1;
constexpr std::int32_t kSelf = -2;

// number of lattice points with sum <= s in d dims: C(s+d, d), saturating
double simplex_state_count(std::int64_t s, int d) {
  double count = 1.0;
  for (int i = 1; i <= d; ++i) count *= static_cast<double>(s + i) / i;
  return count;
}

struct TruncatedChain {
  int dim = 0;
  int events = 0;
  std::size_t count = 0;
  std::vector<std::int64_t> coords;      // count x dim
  std::vector<std::int32_t> transitions; // count x events
  std::vector<double> inv_active;        // 1 / (1 - blocked mass)
  std::vector<std::int32_t> order;       // descending total population
  std::int64_t origin = -1;
  std::int64_t first_arrival = -1;       // index of e_1, or kHit
};

TruncatedChain enumerate_chain(const NetworkModel& model, const TargetSet& target,
                               std::int64_t n, const ExactOptions& options) {
  const int d = model.dimension();
  const LatticeTarget lattice(target, d, n);

  // feasibility check before allocating anything
  std::vector<std::int64_t> limits(d);  // exclusive per-coordinate bounds
  double predicted;
  if (target.kind() == TargetSet::Kind::TotalPopulation) {
    predicted = simplex_state_count(n - 1, d);
    std::fill(limits.begin(), limits.end(), n);
  } else {
    predicted = 1.0;
    for (int i = 0; i < d; ++i) {
      limits[i] = lattice.thresholds()[i];
      predicted *= static_cast<double>(limits[i]);
    }
  }
  if (predicted > static_cast<double>(options.max_states))
    throw OracleInfeasible(
        "exact_probability: state space too large (" +
            std::to_string(static_cast<std::uint64_t>(predicted)) + " states, cap " +
            std::to_string(options.max_states) + ")",
        static_cast<std::uint64_t>(predicted));

  // pack states into 64-bit keys for the build-time index
  std::int64_t max_coord = 1;
  for (auto l : limits) max_coord = std::max(max_coord, l);
  const int bits = std::bit_width(static_cast<std::uint64_t>(max_coord));
  if (bits * d > 63)
    throw OracleInfeasible("exact_probability: state coordinates too large to index",
                           static_cast<std::uint64_t>(predicted));
  auto key_of = [bits, d](std::span<const std::int64_t> z) {
    std::uint64_t key = 0;
    for (int i = 0; i < d; ++i) key |= static_cast<std::uint64_t>(z[i]) << (bits * i);
    return key;
  };

  TruncatedChain chain;
  chain.dim = d;
  chain.events = model.event_count();

  const bool total_kind = target.kind() == TargetSet::Kind::TotalPopulation;
  std::vector<std::int64_t> z(d, 0);
  std::unordered_map<std::uint64_t, std::int32_t> index;
  auto emit = [&]() {
    index.emplace(key_of(z), static_cast<std::int32_t>(chain.count));
    chain.coords.insert(chain.coords.end(), z.begin(), z.end());
    ++chain.count;
  };
  // odometer over the box, pruned by total population for the simplex case
  std::int64_t total = 0;
  for (;;) {
    emit();
    int i = 0;
    while (i < d) {
      ++z[i];
      ++total;
      if (z[i] < limits[i] && (!total_kind || total < n)) break;
      total -= z[i];
      z[i] = 0;
      ++i;
    }
    if (i == d) break;
  }

  chain.transitions.resize(chain.count * chain.events);
  chain.inv_active.resize(chain.count);
  std::vector<std::int64_t> next(d);
  for (std::size_t s = 0; s < chain.count; ++s) {
    const std::span<const std::int64_t> state(&chain.coords[s * d], d);
    double blocked_mass = 0.0;
    for (int e = 0; e < chain.events; ++e) {
      auto& slot = chain.transitions[s * chain.events + e];
      if (model.blocked_at(state, e)) {
        slot = kSelf;
        blocked_mass += model.theta(e);
        continue;
      }
      std::int64_t next_total = 0;
      for (int i = 0; i < d; ++i) {
        next[i] = state[i] + model.event(e)[i];
        next_total += next[i];
      }
      if (lattice.hit(next, next_total)) {
        slot = kHit;
      } else {
        slot = index.at(key_of(next));
      }
    }
    chain.inv_active[s] = 1.0 / (1.0 - blocked_mass);
  }

  chain.order.resize(chain.count);
  std::iota(chain.order.begin(), chain.order.end(), 0);
  std::stable_sort(chain.order.begin(), chain.order.end(),
                   [&](std::int32_t a, std::int32_t b) {
                     std::int64_t ta = 0, tb = 0;
                     for (int i = 0; i < d; ++i) {
                       ta += chain.coords[a * d + i];
                       tb += chain.coords[b * d + i];
                     }
                     return ta > tb;
                   });

  std::vector<std::int64_t> e1(d, 0);
  e1[0] = 1;
  chain.origin = index.at(key_of(z));  // odometer ends back at the origin
  chain.first_arrival = lattice.hit(e1, 1) ? kHit : index.at(key_of(e1));
  return chain;
}

}  // namespace

ExactResult exact_probability(const NetworkModel& model, const TargetSet& target,
                              std::int64_t n, const ExactOptions& options) {
  if (n < 1) throw std::invalid_argument("exact_probability: n must be >= 1");
  if (!(options.tolerance > 0.0))
    throw std::invalid_argument("exact_probability: tolerance must be positive");

  const TruncatedChain chain = enumerate_chain(model, target, n, options);
  ExactResult result;
  result.state_count = chain.count;

  if (chain.first_arrival == kHit) {
    result.probability = 1.0;  // the busy cycle's opening arrival already overflows
    return result;
  }

  // monotone fixed point from q = 0; every sweep is nondecreasing
  std::vector<double> q(chain.count, 0.0);
  const auto& theta = model.theta();
  for (std::uint64_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double worst = 0.0;
    for (std::int32_t s : chain.order) {
      if (s == chain.origin) continue;  // q(0) is pinned to zero
      double acc = 0.0;
      const std::int32_t* row = &chain.transitions[s * chain.events];
      for (int e = 0; e < chain.events; ++e) {
        const std::int32_t t = row[e];
        if (t == kHit)
          acc += theta[e];
        else if (t != kSelf)
          acc += theta[e] * q[t];
      }
      const double updated = acc * chain.inv_active[s];
      assert(updated >= q[s] - 1e-15);
      if (updated > q[s]) {
        const double rel = (updated - q[s]) / updated;
        worst = std::max(worst, rel);
        q[s] = updated;
      }
    }
    result.sweeps = sweep;
    if (worst < options.tolerance) {
      result.probability = q[chain.first_arrival];
      return result;
    }
  }
  throw std::runtime_error("exact_probability: no convergence within " +
                           std::to_string(options.max_sweeps) + " sweeps");
}

DecayRate exact_decay_rate(const NetworkModel& model, const TargetSet& target,
                           std::int64_t n, const ExactOptions& options) {
  DecayRate rate;
  rate.analytic = analytic_decay_rate(model, target);
  const double p = exact_probability(model, target, n, options).probability;
  rate.empirical = -std::log(p) / static_cast<double>(n);
  return rate;
}

namespace {

std::string cache_key(const NetworkModel& model, const TargetSet& target,
                      std::int64_t n, double tolerance) {
  std::ostringstream key;
  key.precision(17);
  key << (model.kind() == NetworkKind::Tandem ? "tandem" : "feedback");
  for (double t : model.theta()) key << ',' << t;
  key << '|' << (target.kind() == TargetSet::Kind::TotalPopulation ? "total" : "buffers");
  for (double b : target.bounds()) key << ',' << b;
  key << "|n=" << n << "|tol=" << tolerance;
  return key.str();
}

}  // namespace

ExactCache::ExactCache(std::filesystem::path file) : file_(std::move(file)) {}

std::optional<double> ExactCache::find(const NetworkModel& model,
                                       const TargetSet& target, std::int64_t n,
                                       double tolerance) const {
  std::ifstream in(file_);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // treat a corrupt sidecar as a miss
  }
  const auto it = j.find(cache_key(model, target, n, tolerance));
  if (it == j.end()) return std::nullopt;
  return it->get<double>();
}

void ExactCache::store(const NetworkModel& model, const TargetSet& target,
                       std::int64_t n, double tolerance, double probability) {
  nlohmann::json j = nlohmann::json::object();
  {
    std::ifstream in(file_);
    if (in) {
      try {
        in >> j;
      } catch (const nlohmann::json::exception&) {
        j = nlohmann::json::object();
      }
    }
  }
  j[cache_key(model, target, n, tolerance)] = probability;
  std::ofstream out(file_);
  out << j.dump(1) << '\n';
}

double ExactCache::probability(const NetworkModel& model, const TargetSet& target,
                               std::int64_t n, const ExactOptions& options) {
  if (auto hit = find(model, target, n, options.tolerance)) return *hit;
  const double p = exact_probability(model, target, n, options).probability;
  store(model, target, n, options.tolerance, p);
  return p;
}

}  // namespace qnis
