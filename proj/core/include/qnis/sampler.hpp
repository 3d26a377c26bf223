#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnis/network.hpp"
#include "qnis/rng.hpp"
#include "qnis/subsolution.hpp"

namespace qnis {

/// State-dependent sampling distribution over events. Implementations are
/// immutable and safe to share across threads; outputs are strictly positive
/// so every drawn path carries a finite likelihood ratio.
class IsKernel {
public:
  virtual ~IsKernel() = default;

  virtual const std::string& label() const = 0;
  virtual int event_count() const = 0;

  /// Writes the sampling distribution at unscaled state z with scale n
  /// (the scaled state is z / n). out.size() == event_count().
  virtual void probabilities(std::span<const std::int64_t> z, std::int64_t n,
                             std::span<double> out) const = 0;
};

/// Mixture kernel sum_k rho_k(x) * saddle(r_k) from a mollified subsolution.
/// Tandem problems apply the interior mixture at every state; the feedback
/// problem switches the per-piece distributions to the boundary saddle family
/// on each axis (the corner z = 0 uses the boundary-2 family, where both of
/// queue 2's events are blocked).
std::unique_ptr<IsKernel> kernel_subsolution(const NetworkModel& model,
                                             const SubsolutionSpec& spec);

/// Static change of measure that swaps the arrival rate with the smallest
/// service rate (ties resolved toward the last node, matching the two-node
/// convention (mu2, mu1, lambda)). Tandem only.
std::unique_ptr<IsKernel> kernel_standard_heuristic(const NetworkModel& model);

/// No change of measure: samples from Theta, likelihood ratio identically one.
std::unique_ptr<IsKernel> kernel_plain(const NetworkModel& model);

struct EpisodeResult {
  bool hit = false;
  double log_lr = 0.0;  ///< sum of log Theta[Y] / Theta_bar[Y|X] until stopping
  std::uint64_t steps = 0;
  State terminal;
};

struct EpisodeLimits {
  /// Episodes terminate almost surely; exceeding this signals a broken kernel.
  std::uint64_t max_steps = 10'000'000;
};

struct StepCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One busy cycle: the opening arrival out of the empty state is deterministic
/// under both measures (no likelihood factor), subsequent events are drawn
/// from the kernel and accumulate log Theta[Y]/Theta_bar[Y|X]. The episode
/// stops when the overflow set is hit or the chain returns to the empty state.
/// If event_trace is given, the event indices are appended to it.
EpisodeResult run_episode(const NetworkModel& model, const TargetSet& target,
                          std::int64_t n, const IsKernel& kernel, SplitMix64& rng,
                          const EpisodeLimits& limits = {},
                          std::vector<int>* event_trace = nullptr);

/// (count, sum, sum of squares, hits) partial with an associative merge; the
/// estimator is a deterministic fold of these regardless of thread count.
struct EstimatorAccumulator {
  std::uint64_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t hits = 0;

  void add(double value, bool hit) {
    ++count;
    sum += value;
    sum_sq += value * value;
    if (hit) ++hits;
  }
  void merge(const EstimatorAccumulator& other) {
    count += other.count;
    sum += other.sum;
    sum_sq += other.sum_sq;
    hits += other.hits;
  }
};

struct EstimatorStats {
  std::uint64_t replications = 0;
  double mean = 0.0;
  double second_moment = 0.0;
  double std_err = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::optional<double> empirical_decay_rate;  ///< -log(mean)/n, absent on zero hits
  std::uint64_t hit_count = 0;
};

EstimatorStats finalize_stats(const EstimatorAccumulator& acc, std::int64_t n);

struct EstimateOptions {
  int workers = 0;  ///< 0 = hardware concurrency
  EpisodeLimits limits{};
};

/// Mean of exp(log_lr) * 1{hit} over seeded replications. Replications run on
/// independent substreams keyed by (seed, index) and are merged in a fixed
/// chunk order, so results are bit-identical for any worker count.
EstimatorStats estimate(const NetworkModel& model, const TargetSet& target,
                        std::int64_t n, const IsKernel& kernel,
                        std::uint64_t replications, std::uint64_t seed,
                        const EstimateOptions& options = {});

}  // namespace qnis
