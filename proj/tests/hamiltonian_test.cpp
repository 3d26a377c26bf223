#include <cmath>
#include <stdexcept>
#include <limits>

#include "doctest.h"

#include "qnis/hamiltonian.hpp"
#include "qnis/rng.hpp"
#include "qnis/subsolution.hpp"

using namespace qnis;

namespace {

const NetworkModel& table1() {
  static const auto m = NetworkModel::tandem(2, 0.1, std::vector<double>{0.45, 0.45});
  return m;
}

const NetworkModel& table8() {
  static const auto m = NetworkModel::feedback(0.1, 0.5, 0.4, 0.1);
  return m;
}

std::vector<double> random_gradient(SplitMix64& rng, int dim, double span = 6.0) {
  std::vector<double> p(dim);
  for (double& v : p) v = -span + 2.0 * span * rng.next_double();
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("hamiltonian");

TEST_CASE("drift of event distributions") {
  const auto f0 = drift(table1(), std::vector<double>{1.0, 0.0, 0.0});
  CHECK(f0[0] == doctest::Approx(1.0));
  CHECK(f0[1] == doctest::Approx(0.0));

  const auto f1 = drift(table1(), table1().theta());
  CHECK(f1[0] == doctest::Approx(-0.35).epsilon(1e-14));
  CHECK(f1[1] == doctest::Approx(0.0).epsilon(1e-14));

  const auto fb = NetworkModel::feedback(0.2, 0.6, 0.7, 0.3);
  const auto f2 = drift(fb, std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(f2[0] == doctest::Approx(0.25));
  CHECK(f2[1] == doctest::Approx(-0.25));

  CHECK_THROWS_AS(drift(table1(), std::vector<double>{0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("relative entropy and its edge cases") {
  const std::vector<double> theta = table1().theta();
  CHECK(relative_entropy(theta, theta) == doctest::Approx(0.0));
  CHECK(relative_entropy(std::vector<double>{1.0, 0.0, 0.0}, theta) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));
  const double inf = relative_entropy(std::vector<double>{0.5, 0.5, 0.0},
                                      std::vector<double>{0.0, 0.5, 0.5});
  CHECK(std::isinf(inf));

  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(3), b(3);
    double sa = 0.0, sb = 0.0;
    for (int j = 0; j < 3; ++j) {
      a[j] = 0.01 + rng.next_double();
      b[j] = 0.01 + rng.next_double();
      sa += a[j];
      sb += b[j];
    }
    for (int j = 0; j < 3; ++j) {
      a[j] /= sa;
      b[j] /= sb;
    }
    CHECK(relative_entropy(a, b) >= -1e-14);
  }
}

TEST_CASE("saddle change of measure reproduces the closed forms") {
  const double g = std::log(4.5);

  const auto at_zero = saddle_change_of_measure(table1(), std::vector<double>{0.0, 0.0});
  CHECK(at_zero[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(at_zero[1] == doctest::Approx(0.45).epsilon(1e-14));

  const auto at_r1 = saddle_change_of_measure(table1(), std::vector<double>{-2 * g, -2 * g});
  CHECK(at_r1[0] == doctest::Approx(0.45).epsilon(1e-12));
  CHECK(at_r1[1] == doctest::Approx(0.45).epsilon(1e-12));
  CHECK(at_r1[2] == doctest::Approx(0.1).epsilon(1e-12));

  // (mu2^2, lambda*mu1, mu2^2) / (lambda*mu1 + 2*mu2^2)
  const auto at_r2 = saddle_change_of_measure(table1(), std::vector<double>{-2 * g, 0.0});
  const double norm = 0.1 * 0.45 + 2 * 0.45 * 0.45;
  CHECK(at_r2[0] == doctest::Approx(0.45 * 0.45 / norm).epsilon(1e-12));
  CHECK(at_r2[1] == doctest::Approx(0.1 * 0.45 / norm).epsilon(1e-12));
  CHECK(at_r2[2] == doctest::Approx(0.45 * 0.45 / norm).epsilon(1e-12));
}

TEST_CASE("d-node saddle matches the explicit tandem formula") {
  // independent route: the closed-form change of measure for the total
  // population gradients of a d-node tandem network
  const double lambda = 0.05;
  const std::vector<double> mu{0.3, 0.25, 0.4};
  const auto m = NetworkModel::tandem(3, lambda, mu);
  const int d = 3;
  const double mu_bar = 0.25;
  const double gamma = std::log(mu_bar / lambda);

  for (int k = 1; k <= d; ++k) {
    std::vector<double> r(d, 0.0);
    for (int i = 0; i < d + 1 - k; ++i) r[i] = -2.0 * gamma;
    const auto computed = saddle_change_of_measure(m, r);

    const double mu_swap = mu[d - k];  // mu_{d+1-k}, 1-based
    std::vector<double> expected;
    expected.push_back(mu_bar);
    for (int i = 1; i <= d - k; ++i) expected.push_back(mu[i - 1]);
    expected.push_back(lambda * mu_swap / mu_bar);
    for (int i = d + 2 - k; i <= d; ++i) expected.push_back(mu[i - 1]);
    double total = 0.0;
    for (double v : expected) total += v;
    for (int e = 0; e <= d; ++e)
      CHECK(computed[e] == doctest::Approx(expected[e] / total).epsilon(1e-12));
  }
}

TEST_CASE("hamiltonian values at reference gradients") {
  CHECK(hamiltonian(table1(), std::vector<double>{0.0, 0.0}) ==
        doctest::Approx(0.0).epsilon(1e-14));
  const double g = std::log(4.5);
  CHECK(std::abs(hamiltonian(table1(), std::vector<double>{-2 * g, -2 * g})) < 1e-12);

  const auto m4 = NetworkModel::tandem(4, 0.04, std::vector<double>(4, 0.24));
  const auto spec = build_tandem_total(m4, 0.1, auto_delta(0.1));
  for (const auto& piece : spec.pieces)
    CHECK(hamiltonian(m4, piece.gradient) >= -1e-12);
}

TEST_CASE("boundary hamiltonian of the feedback model") {
  CHECK_THROWS_AS(boundary_hamiltonian(table1(), 1, std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(boundary_hamiltonian(table8(), 3, std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);

  const std::vector<double> zero{0.0, 0.0};
  CHECK(boundary_hamiltonian(table8(), 1, zero) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(boundary_hamiltonian(table8(), 2, zero) == doctest::Approx(0.0).epsilon(1e-14));

  const auto spec = build_feedback_total(table8(), 0.02, auto_delta(0.02));
  CHECK(boundary_hamiltonian(table8(), 1, spec.pieces[0].gradient) >= -1e-12);
  CHECK(std::abs(boundary_hamiltonian(table8(), 2, spec.pieces[1].gradient)) < 1e-10);
}

TEST_CASE("boundary change of measure follows the dropped-exponent pattern") {
  const auto& m = table8();
  const double lambda = m.theta(0), mu1 = m.theta(1);
  const double mu2c = m.theta(2), mu2f = m.theta(3);  // (1-b)mu2, b*mu2
  SplitMix64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_gradient(rng, 2);
    const std::vector<double> raw1{lambda * std::exp(-p[0] / 2), mu1,
                                   mu2c * std::exp(p[1] / 2),
                                   mu2f * std::exp((p[1] - p[0]) / 2)};
    const std::vector<double> raw2{lambda * std::exp(-p[0] / 2),
                                   mu1 * std::exp((p[0] - p[1]) / 2), mu2c, mu2f};
    for (int b = 1; b <= 2; ++b) {
      const auto& raw = b == 1 ? raw1 : raw2;
      double total = 0.0;
      for (double v : raw) total += v;
      const auto computed = boundary_change_of_measure(m, b, p);
      for (int e = 0; e < 4; ++e)
        CHECK(computed[e] == doctest::Approx(raw[e] / total).epsilon(1e-11));
      CHECK(boundary_hamiltonian(m, b, p) ==
            doctest::Approx(-2.0 * std::log(total)).epsilon(1e-11));
    }
    CHECK(boundary_change_of_measure(m, 1, std::vector<double>{0.0, 0.0})[0] ==
          doctest::Approx(lambda).epsilon(1e-13));
  }
}

TEST_CASE("saddle properties on random gradients") {
  SplitMix64 rng(17);
  const auto m4 = NetworkModel::tandem(4, 0.04, std::vector<double>(4, 0.24));
  for (const auto* m : {&table1(), &table8(), &m4}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = random_gradient(rng, m->dimension());
      const auto star = saddle_change_of_measure(*m, p);
      double total = 0.0;
      for (double v : star) {
        CHECK(v > 0.0);
        total += v;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

      // representation identity: the analytic minimizer attains H(p)
      const double h = hamiltonian(*m, p);
      CHECK(saddle_objective(*m, p, star) == doctest::Approx(h).epsilon(1e-10));

      // concavity along a random segment
      const auto q = random_gradient(rng, m->dimension());
      std::vector<double> mid(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) mid[i] = 0.5 * (p[i] + q[i]);
      CHECK(hamiltonian(*m, mid) >= 0.5 * h + 0.5 * hamiltonian(*m, q) - 1e-12);
    }
  }
}

TEST_CASE("verify_saddle grid search brackets the analytic value") {
  const std::vector<double> zero{0.0, 0.0};
  const auto at_zero = verify_saddle(table1(), zero, 20);
  CHECK(at_zero.analytic == doctest::Approx(0.0).epsilon(1e-14));
  // theta = (0.1, 0.45, 0.45) sits on the resolution-20 grid
  CHECK(at_zero.numeric_inf == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(at_zero.attained == doctest::Approx(0.0).epsilon(1e-14));

  const double g = std::log(4.5);
  const std::vector<double> r2{-2 * g, 0.0};
  const auto coarse = verify_saddle(table1(), r2, 30);
  const auto fine = verify_saddle(table1(), r2, 60);
  CHECK(coarse.gap >= -1e-12);
  CHECK(fine.gap >= -1e-12);
  CHECK(fine.gap <= coarse.gap + 1e-12);  // nested grids refine monotonically
  CHECK(fine.attained == doctest::Approx(fine.analytic).epsilon(1e-10));

  CHECK_THROWS_AS(verify_saddle(table1(), r2, 5), std::invalid_argument);
}

TEST_SUITE_END();
