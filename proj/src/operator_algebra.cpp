#include "se2hypo/operator_algebra.hpp"

#include <cmath>

#include <fmt/format.h>

#include "se2hypo/errors.hpp"
#include "se2hypo/geometry.hpp"

namespace se2hypo {

OperatorParams OperatorParams::from(double sigma, const PotentialSpec& phi) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InputError(fmt::format("sigma must be > 0 (got {})", sigma));
  }
  const auto* q = std::get_if<PotentialSpec::Quadratic>(&phi.kind());
  if (q == nullptr) {
    throw UnsupportedModeError("symbolic operators need a quadratic potential (got " + phi.id() +
                               "); use the spectral module for general potentials");
  }
  return {sigma, q->a1, q->a2};
}

namespace {

// E[x^n] for x ~ N(0, 1/a): (n − 1)!! / a^{n/2}.
double centered_moment(double a, int n) {
  if (n % 2 == 1) return 0.0;
  double m = 1.0;
  for (int j = n - 1; j > 1; j -= 2) m *= j;
  return m / std::pow(a, n / 2);
}

void require_theta_independent(const TestFunction& g, const char* what) {
  if (!g.is_theta_independent()) {
    throw InputError(fmt::format("{}: argument must be θ-independent (k = 0 terms only)", what));
  }
}

}  // namespace

double gaussian_moment(const OperatorParams& p, int a, int b) {
  return centered_moment(p.a1, a) * centered_moment(p.a2, b);
}

double mean(const TestFunction& f, const OperatorParams& p) {
  double m = 0.0;
  for (const auto& [key, c] : f.terms()) {
    if (key.k == 0) m += c * gaussian_moment(p, key.a, key.b);
  }
  return m;
}

double inner(const TestFunction& f, const TestFunction& h, const OperatorParams& p) {
  return mean(f * h, p);
}

TestFunction apply_S(const TestFunction& f, const OperatorParams& p) {
  TestFunction out;
  const double half_s2 = 0.5 * p.sigma * p.sigma;
  for (const auto& [key, c] : f.terms()) {
    out.add_term(key, -half_s2 * key.k * key.k * c);
  }
  return out;
}

TestFunction apply_A(const TestFunction& f, const OperatorParams& p) {
  // ∇Φ·v⊥ = −a1 ξ1 sin θ + a2 ξ2 cos θ, so −(∇Φ·v⊥) ∂θ f = a1 ξ1 sin θ ∂θ f − a2 ξ2 cos θ ∂θ f.
  const TestFunction ft = d_theta(f);
  return apply_field(FieldId::X1, f) + p.a1 * mul_xi1(mul_sin(ft)) - p.a2 * mul_xi2(mul_cos(ft));
}

TestFunction apply_L(const TestFunction& f, const OperatorParams& p) {
  return apply_S(f, p) - apply_A(f, p);
}

TestFunction apply_Pi(const TestFunction& f, const OperatorParams& p, Projection which) {
  TestFunction out;
  for (const auto& [key, c] : f.terms()) {
    if (key.k == 0) out.add_term(key, c);
  }
  if (which == Projection::Pi) out.add_term({0, 0, 0, Phase::Cos}, -mean(f, p));
  return out;
}

TestFunction apply_G(const TestFunction& g, const OperatorParams& p) {
  require_theta_independent(g, "apply_G");
  const TestFunction g1 = d_xi1(g);
  const TestFunction g2 = d_xi2(g);
  return 0.5 * (d_xi1(g1) + d_xi2(g2)) - 0.5 * (p.a1 * mul_xi1(g1) + p.a2 * mul_xi2(g2));
}

TestFunction a2pi_closed_form(const TestFunction& g, const OperatorParams& p) {
  require_theta_independent(g, "a2pi_closed_form");
  const TestFunction g11 = d_xi1(d_xi1(g));
  const TestFunction g12 = d_xi1(d_xi2(g));
  const TestFunction g22 = d_xi2(d_xi2(g));
  const TestFunction grad_phi_dot_vperp =
      -p.a1 * mul_sin(mul_xi1(TestFunction::constant(1.0))) +
      p.a2 * mul_cos(mul_xi2(TestFunction::constant(1.0)));
  return mul_cos(mul_cos(g11)) + 2.0 * mul_sin(mul_cos(g12)) + mul_sin(mul_sin(g22)) -
         grad_phi_dot_vperp * apply_field(FieldId::X3, g);
}

double verify_APi(const TestFunction& g, const OperatorParams& p) {
  require_theta_independent(g, "verify_APi");
  return distance(apply_A(g, p), apply_field(FieldId::X1, g));
}

double verify_PiAPi(const TestFunction& f, const OperatorParams& p) {
  return apply_Pi(apply_A(apply_Pi(f, p, Projection::Pi), p), p, Projection::Pi)
      .max_abs_coefficient();
}

double verify_A2Pi(const TestFunction& g, const OperatorParams& p) {
  require_theta_independent(g, "verify_A2Pi");
  return distance(apply_A(apply_A(g, p), p), a2pi_closed_form(g, p));
}

double verify_G(const TestFunction& g, const OperatorParams& p) {
  require_theta_independent(g, "verify_G");
  const TestFunction composed =
      apply_Pi(apply_A(apply_A(apply_Pi(g, p, Projection::Pi), p), p), p, Projection::Pi);
  return distance(composed, apply_G(g, p));
}

double invariance_residual(const TestFunction& f, const OperatorParams& p) {
  return std::abs(mean(apply_L(f, p), p));
}

TestFunction random_test_function(std::mt19937_64& rng, const RandomFunctionShape& shape) {
  std::uniform_int_distribution<int> degree(0, shape.max_degree);
  std::uniform_int_distribution<int> freq(0, shape.theta_independent ? 0 : shape.max_frequency);
  std::uniform_int_distribution<int> phase(0, 1);
  std::uniform_int_distribution<int> numer(1, 8);
  std::uniform_int_distribution<int> sign(0, 1);
  TestFunction f;
  for (int t = 0; t < shape.terms; ++t) {
    const double c = (sign(rng) ? 1.0 : -1.0) * numer(rng) / 4.0;
    const int a = degree(rng);
    const int b = degree(rng);
    const int k = freq(rng);
    const Phase ph = phase(rng) ? Phase::Sin : Phase::Cos;
    f.add_term({a, b, k, k == 0 ? Phase::Cos : ph}, c);
  }
  return f;
}

}  // namespace se2hypo
