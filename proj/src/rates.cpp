#include "se2hypo/rates.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "se2hypo/errors.hpp"

namespace se2hypo {

double microscopic_constant(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw InputError(fmt::format("sigma must be >= 0 and finite (got {})", sigma));
  }
  return 0.5 * sigma * sigma;
}

double macroscopic_constant(double lambda) {
  if (!std::isfinite(lambda) || !(lambda > 0.0)) {
    throw InputError(fmt::format("Poincare constant must be > 0 (got {})", lambda));
  }
  return 0.5 * lambda;
}

RateBound rate_bound(double lambda_m, double lambda_M, double c1, double c2) {
  for (double v : {lambda_m, lambda_M, c1, c2}) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw InputError(fmt::format("rate_bound: inputs must be > 0 and finite (got {})", v));
    }
  }
  const double coupling = 1.0 + c1 + c2;
  const double gain = lambda_M / (1.0 + lambda_M);
  RateBound b;
  b.delta_max = std::min(1.0, lambda_m / coupling);
  if (!(b.delta_max > 0.0)) throw NumericalError("rate_bound: empty optimization interval");
  auto r = [&](double d) { return std::min(lambda_m - d * coupling, d * gain); };

  // r is concave, so golden-section search finds its maximum.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = b.delta_max;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = r(x1), f2 = r(x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = r(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = r(x1);
    }
  }
  b.delta_star = 0.5 * (lo + hi);
  b.kappa2 = r(b.delta_star) / (1.0 + b.delta_star);
  b.kappa1 = std::sqrt((1.0 + b.delta_star) / (1.0 - b.delta_star));
  return b;
}

const char* to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::Formula: return "formula";
    case Provenance::GridEstimate: return "grid-estimate";
    case Provenance::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

RateReport make_rate_report(double sigma, double lambda, double c2) {
  RateReport r;
  r.sigma = {sigma, Provenance::Formula};
  r.lambda = {lambda, Provenance::GridEstimate};
  r.lambda_m = {microscopic_constant(sigma), Provenance::Formula};
  r.lambda_M = {macroscopic_constant(lambda), Provenance::GridEstimate};
  r.c1 = {0.25 * sigma * sigma, Provenance::Formula};
  r.c2_estimate = {c2, Provenance::GridEstimate};
  const RateBound b = rate_bound(r.lambda_m.value, r.lambda_M.value, r.c1.value, c2);
  // Derived from a grid estimate, so the bound inherits that provenance.
  r.delta_star = {b.delta_star, Provenance::GridEstimate};
  r.kappa1 = {b.kappa1, Provenance::GridEstimate};
  r.kappa2 = {b.kappa2, Provenance::GridEstimate};
  return r;
}

Validation validate(const RateReport& report, double tol) {
  if (!report.gap_spectral || !report.kappa_empirical) {
    throw InputError("validate: report lacks gap_spectral or kappa_empirical");
  }
  Validation v;
  v.tol = tol;
  v.below_gap = report.kappa2.value <= report.gap_spectral->value * (1.0 + tol);
  v.below_empirical = report.kappa2.value <= report.kappa_empirical->value * (1.0 + tol);
  v.pass = v.below_gap && v.below_empirical;
  return v;
}

namespace {

std::vector<std::pair<const char*, const std::optional<TaggedValue>>> fields(const RateReport& r) {
  return {{"sigma", r.sigma},
          {"Lambda", r.lambda},
          {"Lambda_m", r.lambda_m},
          {"Lambda_M", r.lambda_M},
          {"c1", r.c1},
          {"c2_estimate", r.c2_estimate},
          {"delta_star", r.delta_star},
          {"kappa1", r.kappa1},
          {"kappa2", r.kappa2},
          {"gap_spectral", r.gap_spectral},
          {"kappa_empirical", r.kappa_empirical}};
}

}  // namespace

nlohmann::ordered_json to_json(const RateReport& report) {
  nlohmann::ordered_json j;
  for (const auto& [name, v] : fields(report)) {
    if (v) j[name] = {{"value", v->value}, {"provenance", to_string(v->provenance)}};
    else j[name] = nullptr;
  }
  j["bound_label"] = RateBound::label;
  return j;
}

std::string rate_csv_header() {
  std::string h;
  for (const auto& [name, v] : fields(RateReport{})) {
    if (!h.empty()) h += ',';
    h += name;
  }
  return h;
}

std::string rate_csv_row(const RateReport& report) {
  std::string row;
  bool first = true;
  for (const auto& [name, v] : fields(report)) {
    if (!first) row += ',';
    first = false;
    if (v) row += fmt::format("{:.17g}", v->value);
  }
  return row;
}

}  // namespace se2hypo
