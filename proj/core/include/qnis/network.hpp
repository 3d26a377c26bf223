#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qnis {

/// Unscaled queue lengths, one nonnegative entry per node.
using State = std::vector<std::int64_t>;

enum class NetworkKind { Tandem, Feedback };

/// Ordered list of event vectors v_0..v_m of the embedded jump chain.
/// v_0 is always the arrival.
struct EventBasis {
  int dimension = 0;
  std::vector<std::vector<int>> events;

  int count() const { return static_cast<int>(events.size()); }
};

/// Embedded discrete-time Markov chain of a stable d-node tandem network or
/// a two-node network with feedback. Constructors normalize the raw rates so
/// the jump distribution sums to one; the scale factor is kept for reporting.
///
/// Immutable after construction, safe for unrestricted concurrent reads.
class NetworkModel {
public:
  /// d-node tandem: Poisson arrivals at rate lambda, service rates mu[0..d-1].
  /// Requires lambda < min_i mu_i (stability) and all rates positive.
  static NetworkModel tandem(int d, double lambda, std::span<const double> mu);

  /// Two-node network where a job finishing at node 2 returns to node 1 with
  /// probability beta. Requires 0 < beta < 1 and lambda < min(mu1,mu2)*(1-beta).
  static NetworkModel feedback(double lambda, double mu1, double mu2, double beta);

  NetworkKind kind() const { return kind_; }
  int dimension() const { return basis_.dimension; }
  int event_count() const { return basis_.count(); }
  const EventBasis& basis() const { return basis_; }
  const std::vector<int>& event(int e) const { return basis_.events[e]; }

  /// Normalized jump distribution over events; every component is > 0.
  const std::vector<double>& theta() const { return theta_; }
  double theta(int e) const { return theta_[e]; }

  const std::vector<double>& raw_rates() const { return raw_rates_; }
  /// Sum of the raw input rates the constructor divided by.
  double rate_scale() const { return rate_scale_; }

  double arrival_rate() const { return theta_[0]; }
  /// Normalized service rate of a node (0-based). For the feedback model
  /// node 1's rate is the sum of its two completion events.
  double service_rate(int node) const;
  double min_service_rate() const;
  /// Feedback probability beta; throws for tandem models.
  double feedback_probability() const;

  /// Queue coordinate whose emptiness blocks event e, or -1 if never blocked.
  int blocking_coordinate(int e) const { return blocked_[e]; }
  bool blocked_at(std::span<const std::int64_t> z, int e) const {
    return blocked_[e] >= 0 && z[blocked_[e]] == 0;
  }

  /// Constrained step: z <- z + v_e, or z unchanged when e is blocked at z.
  /// Never produces a negative coordinate.
  void apply_step(State& z, int e) const;
  State step(State z, int e) const;

  /// Net change in total population caused by event e (sum of v_e's entries).
  int event_population_delta(int e) const { return pop_delta_[e]; }

private:
  NetworkModel() = default;

  NetworkKind kind_ = NetworkKind::Tandem;
  EventBasis basis_;
  std::vector<double> theta_;
  std::vector<double> raw_rates_;
  double rate_scale_ = 1.0;
  double beta_ = 0.0;
  std::vector<int> blocked_;
  std::vector<int> pop_delta_;
};

/// The scaled overflow set: either total population >= 1 or per-node buffer
/// bounds x_i >= B_i. The origin is never in the set and its complement in
/// the positive orthant is bounded.
class TargetSet {
public:
  enum class Kind { TotalPopulation, IndividualBuffers };

  static TargetSet total_population();
  static TargetSet individual_buffers(std::vector<double> bounds);

  Kind kind() const { return kind_; }
  const std::vector<double>& bounds() const { return bounds_; }

  /// Membership test for a scaled state x (componentwise >= 0).
  bool contains(std::span<const double> x) const;

  /// Smallest integer thresholds t with t/n >= B (or t = n for total
  /// population), guarded against roundoff in B*n.
  std::vector<std::int64_t> lattice_thresholds(int dimension, std::int64_t n) const;

private:
  TargetSet(Kind kind, std::vector<double> bounds)
      : kind_(kind), bounds_(std::move(bounds)) {}

  Kind kind_;
  std::vector<double> bounds_;
};

/// Hit predicate on the unscaled lattice for a fixed scale n. The sampler and
/// the exact solver share this single predicate so their notions of "overflow"
/// cannot drift apart.
class LatticeTarget {
public:
  LatticeTarget(const TargetSet& target, int dimension, std::int64_t n);

  /// total = current total population of z (tracked incrementally by callers).
  bool hit(std::span<const std::int64_t> z, std::int64_t total) const;

  std::int64_t scale() const { return n_; }
  TargetSet::Kind kind() const { return kind_; }
  const std::vector<std::int64_t>& thresholds() const { return thresholds_; }

private:
  TargetSet::Kind kind_;
  std::int64_t n_;
  std::vector<std::int64_t> thresholds_;
};

}  // namespace qnis
