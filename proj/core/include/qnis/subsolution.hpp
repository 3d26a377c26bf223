#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qnis/network.hpp"

namespace qnis {

/// One affine piece <r, x> + offset of a piecewise-affine subsolution.
struct AffinePiece {
  std::vector<double> gradient;
  double offset = 0.0;
};

enum class SubsolutionProblem { TandemTotal, IndividualBuffer, FeedbackTotal };

/// Piecewise-affine subsolution together with its mollification parameters.
/// pieces.back() always has the zero gradient; offsets decrease as the piece
/// index grows so that the kernel reduces to the plain dynamics at the origin.
struct SubsolutionSpec {
  SubsolutionProblem problem = SubsolutionProblem::TandemTotal;
  std::vector<AffinePiece> pieces;
  double gamma = 0.0;    ///< large-deviation decay rate of the problem
  double epsilon = 0.0;  ///< mollification parameter (> 0)
  double delta = 0.0;    ///< piece-separation parameter (> 0)

  int dimension() const {
    return pieces.empty() ? 0 : static_cast<int>(pieces.front().gradient.size());
  }
  int piece_count() const { return static_cast<int>(pieces.size()); }
};

/// The default coupling delta = -epsilon log(epsilon).
double auto_delta(double epsilon);

/// Total-population overflow for a d-node tandem network: d+1 pieces with
/// gradients stepping from (-2g,...,-2g) down to zero and offsets 2g - k*delta,
/// g = log(min mu / lambda).
SubsolutionSpec build_tandem_total(const NetworkModel& model, double epsilon,
                                   double delta);

/// Individual-buffer overflow for a two-node tandem network with scaled bounds
/// B. Three pieces; the gradient family depends on whether mu1 >= mu2, and
/// g = min_i B_i log(mu_i / lambda). Rejects models with d != 2.
SubsolutionSpec build_individual_buffer(const NetworkModel& model,
                                        std::span<const double> bounds,
                                        double epsilon, double delta);

/// Total-population overflow for the two-node feedback network. Three pieces
/// built from g = log((1-beta) min(mu1,mu2) / lambda) and the boundary slope
/// constant a in (0, g]; the last offset is 2g - (1 + 2g/a) delta.
SubsolutionSpec build_feedback_total(const NetworkModel& model, double epsilon,
                                     double delta);

/// Analytic decay rate gamma for a model/target pair.
double analytic_decay_rate(const NetworkModel& model, const TargetSet& target);

/// min_k (<r_k, x> + offset_k)
double evaluate_piecewise(const SubsolutionSpec& spec, std::span<const double> x);

/// Soft-min -eps log sum_k exp(-piece_k(x)/eps); lies within [piecewise - K*eps,
/// piecewise] at every x.
double mollified_value(const SubsolutionSpec& spec, std::span<const double> x);

/// Softmax weights over pieces; strictly positive, sum to one.
std::vector<double> mollified_weights(const SubsolutionSpec& spec,
                                      std::span<const double> x);

/// Gradient of the mollified value: sum_k rho_k(x) r_k.
std::vector<double> mollified_gradient(const SubsolutionSpec& spec,
                                       std::span<const double> x);

/// One boundary facet's verification outcome. For tandem problems slack is the
/// worst Neumann product <DW(x), d_i>; for the feedback problem it is the worst
/// boundary-Hamiltonian mixture sum_k rho_k H_bi(r_k).
struct BoundaryCheck {
  int boundary = 0;  ///< 1-based queue coordinate
  int samples = 0;
  double min_slack = 0.0;
  double floor = 0.0;  ///< proven lower bound, proportional to exp(-delta/eps)
  double cbar = 0.0;   ///< feedback constant 2 max_k |H_bi(r_k)|, 0 for tandem
  double max_violating_weight = 0.0;  ///< largest weight of a violating piece
  bool ok = false;
};

/// Numeric audit of the subsolution properties over deterministic boundary
/// grids plus low-discrepancy interior samples. Violations are reported, never
/// thrown.
struct VerificationReport {
  std::string problem;
  double gamma = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::vector<double> piece_hamiltonians;                  ///< H(r_k)
  std::vector<std::vector<double>> boundary_piece_hamiltonians;  ///< feedback only
  double min_piece_hamiltonian = 0.0;
  int interior_samples = 0;
  double min_interior_hamiltonian = 0.0;  ///< min_x H(DW(x))
  int exit_samples = 0;
  double max_exit_value = 0.0;  ///< max W on the exit boundary
  std::vector<BoundaryCheck> boundaries;
  double min_sandwich_gap = 0.0;  ///< min of piecewise - mollified (>= 0)
  double max_sandwich_gap = 0.0;  ///< max of the same (<= K*eps)
  bool all_ok = false;

  std::string to_json() const;
};

VerificationReport verify_subsolution(const SubsolutionSpec& spec,
                                      const NetworkModel& model,
                                      const TargetSet& target, int sample_count,
                                      std::uint64_t seed);

}  // namespace qnis
