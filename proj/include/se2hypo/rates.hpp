#pragma once

// Hypocoercivity constants and the candidate decay pair (κ1, κ2) built from them.

#include <optional>
#include <string>

#include "json.hpp"

namespace se2hypo {

/// Λm = σ²/2. Throws InputError for σ < 0 or non-finite σ (σ = 0 returns 0).
double microscopic_constant(double sigma);

/// ΛM = Λ/2. Throws InputError unless Λ > 0.
double macroscopic_constant(double lambda);

struct RateBound {
  double kappa1 = 1.0;
  double kappa2 = 0.0;
  double delta_star = 0.0;
  double delta_max = 0.0;
  static constexpr const char* label = "candidate bound (framework-style)";
};

/// Maximizes r(δ) = min(Λm − δ(1 + c1 + c2), δ ΛM/(1 + ΛM)) over (0, δ_max),
/// δ_max = min(1, Λm/(1 + c1 + c2)), by golden-section search (tolerance 1e−10), then
/// κ2 = r(δ*)/(1 + δ*), κ1 = √((1 + δ*)/(1 − δ*)). Inputs must be positive and finite.
RateBound rate_bound(double lambda_m, double lambda_M, double c1, double c2);

enum class Provenance { Formula, GridEstimate, MonteCarlo };
const char* to_string(Provenance p) noexcept;

struct TaggedValue {
  double value = 0.0;
  Provenance provenance = Provenance::Formula;
};

struct RateReport {
  TaggedValue sigma;
  TaggedValue lambda;
  TaggedValue lambda_m;
  TaggedValue lambda_M;
  TaggedValue c1;
  TaggedValue c2_estimate;
  TaggedValue delta_star;
  TaggedValue kappa1;
  TaggedValue kappa2;
  std::optional<TaggedValue> gap_spectral;
  std::optional<TaggedValue> kappa_empirical;
};

/// Fills every formula-derived entry from σ, Λ (grid estimate) and c2 (grid estimate).
RateReport make_rate_report(double sigma, double lambda, double c2);

struct Validation {
  bool pass = false;
  double tol = 0.15;
  bool below_gap = false;
  bool below_empirical = false;
};

/// PASS iff κ2 ≤ gap·(1 + tol) and κ2 ≤ κ_emp·(1 + tol). Throws InputError when either
/// measured entry is missing.
Validation validate(const RateReport& report, double tol = 0.15);

nlohmann::ordered_json to_json(const RateReport& report);
/// Header and row of the one-line CSV rendering (entries without a value are empty).
std::string rate_csv_header();
std::string rate_csv_row(const RateReport& report);

}  // namespace se2hypo
