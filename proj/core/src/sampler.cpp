#include "qnis/sampler.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "qnis/hamiltonian.hpp"

namespace qnis {

namespace {

constexpr int kMaxPieces = 64;
constexpr std::uint64_t kChunkSize = 4096;  // fixed so the fold order never changes

class SubsolutionKernel final : public IsKernel {
public:
  SubsolutionKernel(const NetworkModel& model, const SubsolutionSpec& spec)
      : model_(model), spec_(spec), label_("subsolution") {
    if (spec.dimension() != model.dimension())
      throw std::invalid_argument("kernel_subsolution: spec does not match the model");
    if ((spec.problem == SubsolutionProblem::FeedbackTotal) !=
        (model.kind() == NetworkKind::Feedback))
      throw std::invalid_argument("kernel_subsolution: spec and model kinds disagree");
    if (spec.piece_count() > kMaxPieces)
      throw std::invalid_argument("kernel_subsolution: too many pieces");

    for (const auto& piece : spec_.pieces)
      interior_.push_back(saddle_change_of_measure(model_, piece.gradient));
    if (model_.kind() == NetworkKind::Feedback) {
      for (int b = 1; b <= 2; ++b) {
        std::vector<std::vector<double>> table;
        for (const auto& piece : spec_.pieces)
          table.push_back(boundary_change_of_measure(model_, b, piece.gradient));
        boundary_[b - 1] = std::move(table);
      }
    }
  }

  const std::string& label() const override { return label_; }
  int event_count() const override { return model_.event_count(); }

  void probabilities(std::span<const std::int64_t> z, std::int64_t n,
                     std::span<double> out) const override {
    const int k_count = spec_.piece_count();
    const int dim = model_.dimension();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double inv_eps = 1.0 / spec_.epsilon;

    std::array<double, kMaxPieces> score;
    double s_max = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < k_count; ++k) {
      const auto& piece = spec_.pieces[k];
      double value = piece.offset;
      for (int i = 0; i < dim; ++i)
        value += piece.gradient[i] * (static_cast<double>(z[i]) * inv_n);
      score[k] = -value * inv_eps;
      s_max = std::max(s_max, score[k]);
    }
    double total = 0.0;
    for (int k = 0; k < k_count; ++k) {
      score[k] = std::exp(score[k] - s_max);
      total += score[k];
    }

    const auto& table = component_table(z);
    const int m = model_.event_count();
    for (int e = 0; e < m; ++e) out[e] = 0.0;
    for (int k = 0; k < k_count; ++k) {
      const double rho = score[k] / total;
      const auto& com = table[k];
      for (int e = 0; e < m; ++e) out[e] += rho * com[e];
    }
  }

private:
  const std::vector<std::vector<double>>& component_table(
      std::span<const std::int64_t> z) const {
    if (model_.kind() != NetworkKind::Feedback) return interior_;
    if (z[1] == 0) return boundary_[1];  // includes the corner z = 0
    if (z[0] == 0) return boundary_[0];
    return interior_;
  }

  NetworkModel model_;
  SubsolutionSpec spec_;
  std::string label_;
  std::vector<std::vector<double>> interior_;
  std::array<std::vector<std::vector<double>>, 2> boundary_;
};

class ConstantKernel final : public IsKernel {
public:
  ConstantKernel(std::vector<double> probs, std::string label)
      : probs_(std::move(probs)), label_(std::move(label)) {}

  const std::string& label() const override { return label_; }
  int event_count() const override { return static_cast<int>(probs_.size()); }

  void probabilities(std::span<const std::int64_t>, std::int64_t,
                     std::span<double> out) const override {
    std::copy(probs_.begin(), probs_.end(), out.begin());
  }

private:
  std::vector<double> probs_;
  std::string label_;
};

int pick_event(std::span<const double> probs, double u) {
  double acc = 0.0;
  const int m = static_cast<int>(probs.size());
  for (int e = 0; e < m; ++e) {
    acc += probs[e];
    if (u < acc) return e;
  }
  return m - 1;  // guards the sum-to-one roundoff edge
}

}  // namespace

std::unique_ptr<IsKernel> kernel_subsolution(const NetworkModel& model,
                                             const SubsolutionSpec& spec) {
  return std::make_unique<SubsolutionKernel>(model, spec);
}

std::unique_ptr<IsKernel> kernel_standard_heuristic(const NetworkModel& model) {
  if (model.kind() != NetworkKind::Tandem)
    throw std::invalid_argument(
        "kernel_standard_heuristic: defined for tandem networks only");
  const auto& theta = model.theta();
  int swap_index = 1;
  for (int e = 2; e < model.event_count(); ++e)
    if (theta[e] <= theta[swap_index]) swap_index = e;
  std::vector<double> probs = theta;
  std::swap(probs[0], probs[swap_index]);
  return std::make_unique<ConstantKernel>(std::move(probs), "standard");
}

std::unique_ptr<IsKernel> kernel_plain(const NetworkModel& model) {
  return std::make_unique<ConstantKernel>(model.theta(), "plain");
}

EpisodeResult run_episode(const NetworkModel& model, const TargetSet& target,
                          std::int64_t n, const IsKernel& kernel, SplitMix64& rng,
                          const EpisodeLimits& limits, std::vector<int>* event_trace) {
  if (kernel.event_count() != model.event_count())
    throw std::invalid_argument("run_episode: kernel does not match the model");
  const LatticeTarget lattice(target, model.dimension(), n);

  const int m = model.event_count();
  State z(model.dimension(), 0);
  std::vector<double> probs(m);

  // A busy cycle opens with the arrival that leaves the empty state; it has
  // probability one under both measures, so it carries no likelihood factor.
  z[0] = 1;
  std::int64_t total = 1;
  if (event_trace) event_trace->push_back(0);

  EpisodeResult result;
  if (lattice.hit(z, total)) {
    result.hit = true;
    result.steps = 1;
    result.terminal = std::move(z);
    return result;
  }

  for (std::uint64_t step = 2; step <= limits.max_steps; ++step) {
    kernel.probabilities(z, n, probs);
    const int e = pick_event(probs, rng.next_double());
    if (event_trace) event_trace->push_back(e);
    result.log_lr += std::log(model.theta(e) / probs[e]);

    if (!model.blocked_at(z, e)) {
      const auto& v = model.event(e);
      for (int i = 0; i < model.dimension(); ++i) z[i] += v[i];
      total += model.event_population_delta(e);
    }

    if (lattice.hit(z, total)) {
      result.hit = true;
      result.steps = step;
      result.terminal = std::move(z);
      return result;
    }
    if (total == 0) {  // back at the empty state, the cycle is over
      result.hit = false;
      result.steps = step;
      result.terminal = std::move(z);
      return result;
    }
  }
  throw StepCapExceeded("run_episode: step cap " + std::to_string(limits.max_steps) +
                        " exceeded; the kernel appears to destabilize the drift");
}

EstimatorStats finalize_stats(const EstimatorAccumulator& acc, std::int64_t n) {
  if (acc.count < 2)
    throw std::invalid_argument("estimate: need at least two replications");
  EstimatorStats stats;
  stats.replications = acc.count;
  stats.hit_count = acc.hits;
  const double r = static_cast<double>(acc.count);
  stats.mean = acc.sum / r;
  stats.second_moment = acc.sum_sq / r;
  stats.std_err = std::sqrt(std::max(0.0, stats.second_moment - stats.mean * stats.mean) / r);
  stats.ci95_low = stats.mean - 1.96 * stats.std_err;
  stats.ci95_high = stats.mean + 1.96 * stats.std_err;
  if (stats.mean > 0.0)
    stats.empirical_decay_rate = -std::log(stats.mean) / static_cast<double>(n);
  return stats;
}

EstimatorStats estimate(const NetworkModel& model, const TargetSet& target,
                        std::int64_t n, const IsKernel& kernel,
                        std::uint64_t replications, std::uint64_t seed,
                        const EstimateOptions& options) {
  if (replications < 2)
    throw std::invalid_argument("estimate: need at least two replications");

  const std::uint64_t chunk_count = (replications + kChunkSize - 1) / kChunkSize;
  std::vector<EstimatorAccumulator> partials(chunk_count);

  auto run_chunk = [&](std::uint64_t c) {
    EstimatorAccumulator acc;
    const std::uint64_t begin = c * kChunkSize;
    const std::uint64_t end = std::min(replications, begin + kChunkSize);
    for (std::uint64_t r = begin; r < end; ++r) {
      SplitMix64 rng = replication_stream(seed, r);
      const EpisodeResult episode =
          run_episode(model, target, n, kernel, rng, options.limits);
      acc.add(episode.hit ? std::exp(episode.log_lr) : 0.0, episode.hit);
    }
    partials[c] = acc;
  };

  int workers = options.workers > 0
                    ? options.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(chunk_count)));

  if (workers == 1) {
    for (std::uint64_t c = 0; c < chunk_count; ++c) run_chunk(c);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        try {
          while (!failed.load(std::memory_order_relaxed)) {
            const std::uint64_t c = next.fetch_add(1);
            if (c >= chunk_count) break;
            run_chunk(c);
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  EstimatorAccumulator total;
  for (const auto& partial : partials) total.merge(partial);
  return finalize_stats(total, n);
}

}  // namespace qnis
