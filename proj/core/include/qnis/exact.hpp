#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "qnis/network.hpp"

namespace qnis {

struct ExactOptions {
  double tolerance = 1e-12;          ///< max relative update per sweep at stop
  std::size_t max_states = 5'000'000;
  std::uint64_t max_sweeps = 200'000;
};

struct OracleInfeasible : std::runtime_error {
  OracleInfeasible(const std::string& msg, std::uint64_t count)
      : std::runtime_error(msg), state_count(count) {}
  std::uint64_t state_count;
};

struct ExactResult {
  double probability = 0.0;
  std::size_t state_count = 0;
  std::uint64_t sweeps = 0;
};

/// First-step analysis on the truncated lattice: q(z) is the probability of
/// reaching the overflow set before the empty state, solved by monotone
/// Gauss-Seidel sweeps ordered by decreasing total population (blocked events
/// are self-loops and are eliminated algebraically). The answer is
/// p_n = q(e_1): a busy cycle of the network opens with the arrival that
/// leaves the empty state, since no service clock runs while the system is
/// empty. The sampler shares this convention.
ExactResult exact_probability(const NetworkModel& model, const TargetSet& target,
                              std::int64_t n, const ExactOptions& options = {});

struct DecayRate {
  double empirical = 0.0;  ///< -log(p_n)/n
  double analytic = 0.0;   ///< large-deviation limit for this model/target
};

DecayRate exact_decay_rate(const NetworkModel& model, const TargetSet& target,
                           std::int64_t n, const ExactOptions& options = {});

/// JSON sidecar keyed by (model, target, n, tolerance); keeps repeated suite
/// runs from re-solving the same systems.
class ExactCache {
public:
  explicit ExactCache(std::filesystem::path file);

  std::optional<double> find(const NetworkModel& model, const TargetSet& target,
                             std::int64_t n, double tolerance) const;
  void store(const NetworkModel& model, const TargetSet& target, std::int64_t n,
             double tolerance, double probability);

  /// Solve through the cache.
  double probability(const NetworkModel& model, const TargetSet& target,
                     std::int64_t n, const ExactOptions& options = {});

private:
  std::filesystem::path file_;
};

}  // namespace qnis
