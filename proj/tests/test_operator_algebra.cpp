#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "se2hypo/errors.hpp"
#include "se2hypo/operator_algebra.hpp"

using namespace se2hypo;

namespace {

TestFunction xi1() { return TestFunction::monomial(1, 1, 0); }
TestFunction xi2() { return TestFunction::monomial(1, 0, 1); }

double double_factorial(int n) {
  double r = 1;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

// ∫∫ f e^{−Φ} dξ dθ / (Z 2π) by midpoint quadrature.
double quadrature_mean(const TestFunction& f, const OperatorParams& p) {
  const int n = 160, m = 16;
  const double L = 9.0, h = 2 * L / n;
  double num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = -L + (i + 0.5) * h, y = -L + (j + 0.5) * h;
      const double w = std::exp(-0.5 * (p.a1 * x * x + p.a2 * y * y));
      double avg = 0;
      for (int k = 0; k < m; ++k) avg += f.evaluate(x, y, 2 * std::numbers::pi * k / m);
      num += w * avg / m;
      den += w;
    }
  }
  return num / den;
}

}  // namespace

TEST_SUITE("operator_algebra") {

TEST_CASE("Gaussian moments") {
  const OperatorParams p{1.0, 2.0, 0.5};
  for (int a = 0; a <= 6; ++a) {
    for (int b = 0; b <= 6; ++b) {
      double ref = 0.0;
      if (a % 2 == 0 && b % 2 == 0) {
        ref = double_factorial(a - 1) / std::pow(p.a1, a / 2.0) * double_factorial(b - 1) /
              std::pow(p.a2, b / 2.0);
      }
      CHECK(gaussian_moment(p, a, b) == doctest::Approx(ref));
    }
  }
}

TEST_CASE("mean agrees with quadrature") {
  const OperatorParams p{1.0, 1.5, 0.75};
  std::mt19937_64 rng(21);
  for (int i = 0; i < 5; ++i) {
    const TestFunction f = random_test_function(rng, {});
    CHECK(mean(f, p) == doctest::Approx(quadrature_mean(f, p)).epsilon(1e-9).scale(1.0));
  }
  const TestFunction f = random_test_function(rng, {});
  const TestFunction g = random_test_function(rng, {});
  CHECK(inner(f, g, p) == doctest::Approx(quadrature_mean(f * g, p)).epsilon(1e-9).scale(1.0));
}

TEST_CASE("apply_S") {
  const OperatorParams p1{1.0, 1, 1};
  const TestFunction c = TestFunction::monomial(1, 0, 0, 1, Phase::Cos);
  CHECK(apply_S(c, p1) == -0.5 * c);
  CHECK(apply_S(xi1() * xi2() + TestFunction::constant(3), p1).is_zero());
  const TestFunction f = TestFunction::monomial(1, 1, 0, 2, Phase::Sin);
  CHECK(apply_S(f, {2.0, 1, 1}) == -8.0 * f);
}

TEST_CASE("apply_A against finite differences") {
  const OperatorParams p{1.0, 1.3, 0.6};
  std::mt19937_64 rng(22);
  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const TestFunction f = random_test_function(rng, {});
    const double x = 0.6, y = -0.4, th = 2.1;
    auto fx = [&](double s) { return f.evaluate(x + s * std::cos(th), y + s * std::sin(th), th); };
    const double x1f = (fx(h) - fx(-h)) / (2 * h);
    const double dth = (f.evaluate(x, y, th + h) - f.evaluate(x, y, th - h)) / (2 * h);
    const double grad_dot_vperp = -p.a1 * x * std::sin(th) + p.a2 * y * std::cos(th);
    const double ref = x1f - grad_dot_vperp * dth;
    CHECK(apply_A(f, p).evaluate(x, y, th) == doctest::Approx(ref).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("apply_A examples") {
  const OperatorParams p{1.0, 1, 1};
  CHECK(apply_A(xi1(), p) == TestFunction::monomial(1, 0, 0, 1, Phase::Cos));
  CHECK(apply_A(TestFunction::constant(2), p).is_zero());
  // cos θ: −(∇Φ·v⊥)·(−sin θ) = (−ξ¹ sin θ + ξ² cos θ) sin θ
  const TestFunction c = TestFunction::monomial(1, 0, 0, 1, Phase::Cos);
  const TestFunction s = TestFunction::monomial(1, 0, 0, 1, Phase::Sin);
  const TestFunction expected = (-1.0 * xi1() * s + xi2() * c) * s;
  CHECK(distance(apply_A(c, p), expected) == 0.0);
  CHECK_THROWS_AS(OperatorParams::from(1.0, PotentialSpec::double_well(1)), UnsupportedModeError);
  CHECK_THROWS_AS(OperatorParams::from(0.0, PotentialSpec::quadratic(1, 1)), InputError);
}

TEST_CASE("projections") {
  const OperatorParams p{1.0, 1, 1};
  const TestFunction c = TestFunction::monomial(1, 0, 0, 1, Phase::Cos);
  CHECK(apply_Pi(c * xi1(), p, Projection::PiS).is_zero());
  const TestFunction g = xi1() * xi1() * xi2() + TestFunction::constant(2);
  CHECK(apply_Pi(g, p, Projection::PiS) == g);
  CHECK(apply_Pi(xi1() * xi1(), p, Projection::Pi) == xi1() * xi1() - TestFunction::constant(1));
}

TEST_CASE("apply_G examples") {
  const OperatorParams p{1.0, 1, 1};
  CHECK(apply_G(xi1(), p) == -0.5 * xi1());
  CHECK(apply_G(TestFunction::constant(1), p).is_zero());
  CHECK(apply_G(xi1() * xi1(), p) == TestFunction::constant(1) - xi1() * xi1());
  CHECK_THROWS_AS(apply_G(TestFunction::monomial(1, 0, 0, 1), p), InputError);
}

TEST_CASE("identities hold exactly on examples") {
  const OperatorParams p{1.0, 1, 1};
  const TestFunction s = TestFunction::monomial(1, 0, 1, 1, Phase::Sin);
  for (const auto& g : {xi1(), TestFunction::constant(3), xi1() * xi1() * xi2()}) {
    CHECK(verify_APi(g, p) == 0.0);
    CHECK(verify_A2Pi(g, p) == 0.0);
    CHECK(verify_G(g, p) == 0.0);
  }
  CHECK(verify_PiAPi(xi1(), p) == 0.0);
  CHECK(verify_PiAPi(xi1() * xi1() * xi1() + s, p) == 0.0);
  CHECK(invariance_residual(xi1() * TestFunction::monomial(1, 0, 0, 1), p) == 0.0);
  CHECK(invariance_residual(TestFunction::monomial(1, 2, 0, 3, Phase::Sin), p) == 0.0);
}

TEST_CASE("A2Pi leading term for (xi1)^2") {
  const OperatorParams p{1.0, 1, 1};
  const TestFunction closed = a2pi_closed_form(xi1() * xi1(), p);
  // 2cos²θ = 1 + cos 2θ
  CHECK(closed.terms().at({0, 0, 0, Phase::Cos}) == 1.0);
  CHECK(closed.terms().at({0, 0, 2, Phase::Cos}) == 1.0);
}

TEST_CASE("identities on random functions") {
  std::mt19937_64 rng(23);
  const auto start = std::chrono::steady_clock::now();
  for (double sigma : {0.5, 1.0, 2.0}) {
    const OperatorParams p{sigma, 1.0, 1.0};
    for (int i = 0; i < 50; ++i) {
      const TestFunction f = random_test_function(rng, {});
      const TestFunction g = random_test_function(rng, {4, 3, 3, true});
      CHECK(verify_PiAPi(f, p) == 0.0);
      CHECK(verify_APi(g, p) == 0.0);
      CHECK(verify_A2Pi(g, p) == 0.0);
      CHECK(verify_G(g, p) == 0.0);
      CHECK(invariance_residual(f, p) <= 1e-12);
      // A is antisymmetric in H
      CHECK(std::abs(inner(apply_A(f, p), f, p)) <= 1e-10 * (1 + inner(f, f, p)));
    }
  }
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 10.0);
}

TEST_CASE("identities with anisotropic curvature") {
  // Gaussian moments 1/a are not dyadic here, so the mean removal rounds.
  std::mt19937_64 rng(24);
  const OperatorParams p{1.0, 1.5, 0.75};
  for (int i = 0; i < 50; ++i) {
    const TestFunction f = random_test_function(rng, {});
    const TestFunction g = random_test_function(rng, {4, 3, 3, true});
    CHECK(verify_PiAPi(f, p) == 0.0);
    CHECK(verify_APi(g, p) == 0.0);
    CHECK(verify_A2Pi(g, p) == 0.0);
    CHECK(verify_G(g, p) <= 1e-12 * (1 + g.max_abs_coefficient()));
    CHECK(invariance_residual(f, p) <= 1e-12);
  }
}

}
