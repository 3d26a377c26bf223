#pragma once

#include <span>
#include <vector>

#include "qnis/network.hpp"

namespace qnis {

/// Mean drift F(theta) = sum_i theta[v_i] * v_i for a distribution over the
/// model's events.
std::vector<double> drift(const NetworkModel& model, std::span<const double> theta);

/// Relative entropy R(theta || ref) = sum theta_i log(theta_i / ref_i) with the
/// convention 0 log 0 = 0. Support violations yield +infinity, not an error.
double relative_entropy(std::span<const double> theta, std::span<const double> ref);

/// Closed-form saddle-point change of measure for gradient p:
/// component i proportional to Theta[v_i] exp(-<p, v_i>/2). Strictly positive
/// and sums to one for every finite p; computed with max-shifted exponents so
/// large |p| cannot overflow.
std::vector<double> saddle_change_of_measure(const NetworkModel& model,
                                             std::span<const double> p);

/// Interior Hamiltonian H(p) = 2 log N(p) with
/// N(p) = [sum_i Theta[v_i] exp(-<p, v_i>/2)]^{-1}. Concave in p, H(0) = 0.
double hamiltonian(const NetworkModel& model, std::span<const double> p);

/// Boundary Hamiltonian of the feedback model on boundary i in {1,2}: the
/// events blocked on that boundary keep their raw Theta weight (exponent
/// dropped). Tandem models are rejected; they use the Neumann condition.
double boundary_hamiltonian(const NetworkModel& model, int boundary,
                            std::span<const double> p);

/// Saddle change of measure with the boundary exponent pattern.
std::vector<double> boundary_change_of_measure(const NetworkModel& model, int boundary,
                                               std::span<const double> p);

/// The objective of the variational representation,
/// <p, F(theta)> + 2 R(theta || Theta); its infimum over distributions is H(p).
double saddle_objective(const NetworkModel& model, std::span<const double> p,
                        std::span<const double> theta);

/// Result of brute-forcing the variational representation over a barycentric
/// simplex grid (interior points only, resolution points per edge).
struct SaddleCheck {
  double numeric_inf = 0.0;   ///< min of the objective over the grid
  double analytic = 0.0;      ///< H(p)
  double gap = 0.0;           ///< numeric_inf - analytic (>= 0 up to roundoff)
  double attained = 0.0;      ///< objective evaluated at the analytic minimizer
  int resolution = 0;
  std::vector<double> argmin; ///< best grid distribution
};

SaddleCheck verify_saddle(const NetworkModel& model, std::span<const double> p,
                          int resolution);

}  // namespace qnis
