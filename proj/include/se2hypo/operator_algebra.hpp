#pragma once

// Exact symbolic realization of the generator pieces on the polynomial × Fourier class,
// for quadratic Φ = (a1 ξ1² + a2 ξ2²)/2:
//   S = (σ²/2) ∂θ²,
//   A = X1 − (∇Φ · v⊥(θ)) X2,
//   L = S − A,
//   Π_S = θ-average,  Π = Π_S − (·, 1)_H,
//   G = ½ Δξ − ½ ∇Φ · ∇ξ.
// Inner products use closed-form Gaussian moments, so identities hold to rounding.

#include <cstdint>
#include <random>

#include "se2hypo/potential.hpp"
#include "se2hypo/test_function.hpp"

namespace se2hypo {

struct OperatorParams {
  double sigma = 1.0;
  double a1 = 1.0;
  double a2 = 1.0;

  /// Requires sigma > 0 and a quadratic potential; otherwise UnsupportedModeError/InputError.
  static OperatorParams from(double sigma, const PotentialSpec& phi);
};

enum class Projection { PiS, Pi };

/// E[(ξ¹)^a (ξ²)^b] under Z⁻¹ e^{−Φ} dξ.
double gaussian_moment(const OperatorParams& p, int a, int b);

/// (f, 1)_H.
double mean(const TestFunction& f, const OperatorParams& p);
/// (f, h)_H.
double inner(const TestFunction& f, const TestFunction& h, const OperatorParams& p);

TestFunction apply_S(const TestFunction& f, const OperatorParams& p);
TestFunction apply_A(const TestFunction& f, const OperatorParams& p);
TestFunction apply_L(const TestFunction& f, const OperatorParams& p);
TestFunction apply_Pi(const TestFunction& f, const OperatorParams& p, Projection which);
/// ½Δg − ½∇Φ·∇g; g must be θ-independent.
TestFunction apply_G(const TestFunction& g, const OperatorParams& p);

/// cos²θ ∂11 g + 2 sinθ cosθ ∂12 g + sin²θ ∂22 g − (∇Φ·v⊥) X3 g.
TestFunction a2pi_closed_form(const TestFunction& g, const OperatorParams& p);

// Identity residuals: canonical-form distances, exactly zero when the identity holds.
double verify_APi(const TestFunction& g, const OperatorParams& p);
double verify_PiAPi(const TestFunction& f, const OperatorParams& p);
double verify_A2Pi(const TestFunction& g, const OperatorParams& p);
/// Distance between Π∘A∘A∘Π g and apply_G(g).
double verify_G(const TestFunction& g, const OperatorParams& p);
/// |(L f, 1)_H|.
double invariance_residual(const TestFunction& f, const OperatorParams& p);

struct RandomFunctionShape {
  int terms = 4;
  int max_degree = 3;     // per ξ-component
  int max_frequency = 3;  // θ modes
  bool theta_independent = false;
};

/// Random element of the class with dyadic coefficients (±{1,…,8}/4), so every identity
/// check runs without rounding.
TestFunction random_test_function(std::mt19937_64& rng, const RandomFunctionShape& shape);

}  // namespace se2hypo
