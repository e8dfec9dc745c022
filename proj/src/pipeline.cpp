#include "se2hypo/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <optional>

#include <fmt/format.h>

#include "se2hypo/errors.hpp"
#include "se2hypo/operator_algebra.hpp"
#include "se2hypo/rates.hpp"
#include "se2hypo/seeding.hpp"
#include "se2hypo/simulator.hpp"
#include "se2hypo/spectral.hpp"

namespace se2hypo {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct SpectrumState {
  double lambda = 0.0;
  double gap = 0.0;
  double c2 = 0.0;
};

struct Context {
  const RunConfig& cfg;
  PotentialSpec phi;
  fs::path out;
  bool echo;
  std::vector<Check> checks;
  std::optional<SpectrumState> spectrum;
  Json timings = Json::object();

  std::uint64_t seed(const char* module) const { return hash64(cfg.seed, module); }

  void add(Check c) {
    if (echo) {
      fmt::print("{} {} {}\n", c.skipped ? "SKIP" : c.pass ? "PASS" : "FAIL", c.name,
                 c.values.dump());
    }
    checks.push_back(std::move(c));
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string resolution(int n1, int n2, int modes) {
  return fmt::format("{}x{}x{}", n1, n2, 2 * modes + 1);
}

Discretization grid_for(double half_width, int n, int modes, double boundary_tol) {
  Discretization d;
  d.half_width1 = d.half_width2 = half_width;
  d.n1 = d.n2 = n;
  d.modes = modes;
  d.boundary_tol = boundary_tol;
  d.max_dimension = std::max(d.max_dimension, d.dimension());
  return d;
}

// ---------------------------------------------------------------------------

void verify_identities(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto& ic = cfg.identities;
  std::vector<QuantityRow> rows;

  if (ctx.phi.is_quadratic()) {
    const std::uint64_t seed = ctx.seed("operator_algebra");
    const OperatorParams p = OperatorParams::from(cfg.sigma, ctx.phi);
    std::mt19937_64 rng(seed);
    RandomFunctionShape general{ic.terms, ic.max_degree, ic.max_frequency, false};
    RandomFunctionShape flat = general;
    flat.theta_independent = true;
    double pi_a_pi = 0.0, a_pi = 0.0, a2_pi = 0.0, g = 0.0, inv = 0.0;
    for (int s = 0; s < ic.samples; ++s) {
      const TestFunction f = random_test_function(rng, general);
      const TestFunction h = random_test_function(rng, flat);
      pi_a_pi = std::max(pi_a_pi, verify_PiAPi(f, p));
      a_pi = std::max(a_pi, verify_APi(h, p));
      a2_pi = std::max(a2_pi, verify_A2Pi(h, p));
      g = std::max(g, verify_G(h, p));
      inv = std::max(inv, invariance_residual(f, p));
    }
    const std::string res = fmt::format("symbolic:{}", ic.samples);
    for (auto [name, v] : {std::pair{"symbolic_PiAPi", pi_a_pi}, std::pair{"symbolic_APi_minus_X1", a_pi},
                           std::pair{"symbolic_A2Pi_minus_closed_form", a2_pi},
                           std::pair{"symbolic_PiA2Pi_minus_G", g}, std::pair{"symbolic_invariance", inv}}) {
      rows.push_back({name, v, res, seed});
    }
    Check c{"symbolic_identities", false, false, Json::object()};
    c.values = {{"PiAPi", pi_a_pi}, {"APi_minus_X1", a_pi}, {"A2Pi_minus_closed_form", a2_pi},
                {"PiA2Pi_minus_G", g}, {"invariance", inv}, {"samples", ic.samples}};
    c.pass = std::max({pi_a_pi, a_pi, a2_pi, g, inv}) <= 1e-10;
    ctx.add(std::move(c));
  } else {
    Check c{"symbolic_identities", true, true, Json::object()};
    c.values = {{"reason", "symbolic mode requires a quadratic potential"}};
    ctx.add(std::move(c));
  }

  const std::uint64_t seed = ctx.seed("spectral");
  const Discretization d = grid_for(ic.half_width, ic.n, ic.modes, cfg.discretization.boundary_tol);
  const OperatorSet ops = assemble(cfg.sigma, ctx.phi, d);
  const std::string res = d.id();

  const StructureReport sr = check_structure(ops, ic.structure_samples, seed);
  {
    Check c{"discrete_structure", false, false, Json::object()};
    c.values = {{"S_symmetry", sr.s_symmetry},
                {"S_max_rayleigh", sr.s_max_rayleigh},
                {"A_antisymmetry", sr.a_antisymmetry},
                {"PiS_idempotence", sr.pis_idempotence},
                {"PiS_self_adjoint", sr.pis_self_adjoint},
                {"Pi_idempotence", sr.pi_idempotence},
                {"Pi_self_adjoint", sr.pi_self_adjoint},
                {"quadratic_form_defect", sr.quadratic_form_defect},
                {"constant_in_kernel", sr.constant_in_kernel},
                {"resolution", res}};
    c.pass = std::max({sr.s_symmetry, sr.a_antisymmetry, sr.pis_idempotence, sr.pis_self_adjoint,
                       sr.pi_idempotence, sr.pi_self_adjoint, sr.quadratic_form_defect,
                       sr.constant_in_kernel}) <= 1e-10 &&
             sr.s_max_rayleigh <= 0.0;
    for (const auto& [k, v] : c.values.items()) {
      if (v.is_number()) rows.push_back({"structure_" + k, v.get<double>(), res, seed});
    }
    ctx.add(std::move(c));
  }

  const ProjectionReport pr = verify_projection_identities(ops, 1e-10, 1e-8, seed + 1);
  {
    Check c{"discrete_projection_identities", pr.pass, false, Json::object()};
    c.values = {{"PiAPi_norm", pr.pi_a_pi_norm},
                {"PiA2Pi_minus_G_relative_interior", pr.a2_minus_g_relative},
                {"resolution", res}};
    rows.push_back({"PiAPi_norm", pr.pi_a_pi_norm, res, seed + 1});
    rows.push_back({"PiA2Pi_minus_G_relative_interior", pr.a2_minus_g_relative, res, seed + 1});
    ctx.add(std::move(c));
  }

  const double lambda_h = discrete_poincare_constant(ops);
  const CoercivityReport cr = check_coercivity(ops, lambda_h, ic.coercivity_samples, seed + 2);
  {
    Check c{"coercivity", cr.microscopic_holds && cr.macroscopic_holds, false, Json::object()};
    c.values = {{"microscopic_holds", cr.microscopic_holds},
                {"microscopic_min_ratio", cr.microscopic_min_ratio},
                {"macroscopic_min_ratio", cr.macroscopic_min_ratio},
                {"Lambda_h", lambda_h},
                {"macroscopic_threshold", 0.95 * lambda_h / 2.0},
                {"resolution", res}};
    rows.push_back({"microscopic_min_ratio", cr.microscopic_min_ratio, res, seed + 2});
    rows.push_back({"macroscopic_min_ratio", cr.macroscopic_min_ratio, res, seed + 2});
    rows.push_back({"Lambda_h_discrete", lambda_h, res, seed + 2});
    ctx.add(std::move(c));
  }
  write_quantity_csv(ctx.out / "identities.csv", rows);
}

// ---------------------------------------------------------------------------

void spectrum(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const std::uint64_t seed = ctx.seed("spectral");
  std::vector<QuantityRow> rows;
  SpectrumState state;

  // Potential: Z, Λ, C3.
  {
    const std::uint64_t pseed = ctx.seed("potential");
    const Box box = cfg.poincare.half_width > 0.0
                        ? Box::symmetric(cfg.poincare.half_width, cfg.poincare.half_width)
                        : ctx.phi.default_box();
    if (!ctx.phi.is_tabulated()) {
      const double ratio = boundary_weight_ratio(ctx.phi, box);
      if (ratio > cfg.poincare.boundary_tol) {
        throw BoxTooSmallError(fmt::format(
            "poincare: boundary weight ratio {:.3e} exceeds {:.1e}; enlarge poincare.half_width",
            ratio, cfg.poincare.boundary_tol));
      }
    }
    const NodeGrid grid{box, cfg.poincare.n, cfg.poincare.n};
    const double z = normalization(ctx.phi, MidpointRule{ctx.phi.default_box(), 256, 256});
    const PoincareResult pr = poincare_constant(ctx.phi, grid, cfg.poincare.refine);
    const double c3 = check_C3(ctx.phi, grid);
    const bool below = check_C1_bounded_below(ctx.phi, grid);
    const std::string res = fmt::format("{}x{}", grid.n1, grid.n2);
    rows.push_back({"Z", z, "256x256", pseed});
    rows.push_back({"Lambda", pr.lambda, res, pseed});
    rows.push_back({"Lambda_refinement_delta", pr.refinement_delta, res, pseed});
    rows.push_back({"C3_constant", c3, res, pseed});
    Check c{"potential_conditions", pr.lambda > 0.0 && below && std::isfinite(c3), false, Json::object()};
    c.values = {{"Z", z},
                {"Lambda", pr.lambda},
                {"Lambda_refinement_delta", pr.refinement_delta},
                {"C3_constant", c3},
                {"bounded_below", below},
                {"resolution", res}};
    ctx.add(std::move(c));
    state.lambda = pr.lambda;
  }

  // Spectral gap.
  {
    const OperatorSet ops = assemble(cfg.sigma, ctx.phi, cfg.discretization);
    GapOptions go;
    go.method = parse_gap_method(cfg.spectrum.method);
    go.dense_limit = cfg.spectrum.dense_limit;
    go.shift = cfg.spectrum.shift;
    go.krylov_dim = cfg.spectrum.krylov_dim;
    go.seed = seed;
    const GapResult gap = spectral_gap(ops, go);
    const std::string res = cfg.discretization.id();
    rows.push_back({"spectral_gap", gap.gap, res, seed});
    rows.push_back({"slowest_real", gap.slowest.real(), res, seed});
    rows.push_back({"slowest_imag", std::abs(gap.slowest.imag()), res, seed});
    rows.push_back({"max_ritz_residual", gap.max_residual, res, seed});
    rows.push_back({"circle_gap", circle_gap(cfg.sigma, cfg.discretization.modes), res, seed});
    Check c{"spectral_gap", gap.gap > 0.0, false, Json::object()};
    c.values = {{"gap", gap.gap},
                {"slowest_real", gap.slowest.real()},
                {"slowest_imag", std::abs(gap.slowest.imag())},
                {"method", to_string(gap.method)},
                {"eigenvalues_used", gap.eigenvalues_used},
                {"max_residual", gap.max_residual},
                {"resolution", res}};
    ctx.add(std::move(c));
    state.gap = gap.gap;

    std::string ev = "index,real,imag\n";
    for (std::size_t i = 0; i < gap.leading.size(); ++i) {
      ev += fmt::format("{},{:.17g},{:.17g}\n", i, gap.leading[i].real(), gap.leading[i].imag());
    }
    write_text(ctx.out / "eigenvalues.csv", ev);
    if (cfg.spectrum.dump_matrices) {
      write_coordinate_matrix(ctx.out / "S.txt", ops.S.matrix());
      write_coordinate_matrix(ctx.out / "A.txt", ops.A.matrix());
      write_coordinate_matrix(ctx.out / "L.txt", ops.L.matrix());
      write_coordinate_matrix(ctx.out / "G.txt", ops.G.matrix());
    }
  }

  // Elliptic estimates at two resolutions.
  {
    const auto& ec = cfg.elliptic;
    std::vector<EllipticReport> reports;
    for (int n : {ec.n_coarse, ec.n_fine}) {
      const Discretization d = grid_for(ec.half_width, n, ec.modes, cfg.discretization.boundary_tol);
      const OperatorSet ops = assemble(cfg.sigma, ctx.phi, d);
      const EllipticReport r = elliptic_estimate_check(ops, ec.samples, seed + 7);
      const std::string res = d.id();
      rows.push_back({"c1_bound", r.c1_bound, res, seed + 7});
      rows.push_back({"c1_observed", r.c1_observed, res, seed + 7});
      rows.push_back({"c1_sup", r.c1_sup, res, seed + 7});
      rows.push_back({"c1_observed_pi", r.c1_observed_pi, res, seed + 7});
      rows.push_back({"c2_random", r.c2_random, res, seed + 7});
      rows.push_back({"c2_sup", r.c2_sup, res, seed + 7});
      rows.push_back({"c2_estimate", r.c2_estimate, res, seed + 7});
      rows.push_back({"c2_observed_pi", r.c2_observed_pi, res, seed + 7});
      reports.push_back(r);
    }
    const double c2c = reports[0].c2_estimate, c2f = reports[1].c2_estimate;
    const double drift = std::abs(c2f - c2c) / c2c;
    Check c{"elliptic_estimates", false, false, Json::object()};
    c.values = {{"c1_bound", reports[1].c1_bound},
                {"c1_observed_coarse", reports[0].c1_observed},
                {"c1_observed_fine", reports[1].c1_observed},
                {"c1_sup_fine", reports[1].c1_sup},
                {"c2_estimate_coarse", c2c},
                {"c2_estimate_fine", c2f},
                {"c2_relative_change", drift},
                {"c2_label", "grid-dependent estimate"},
                {"resolutions", {resolution(ec.n_coarse, ec.n_coarse, ec.modes),
                                 resolution(ec.n_fine, ec.n_fine, ec.modes)}}};
    c.pass = reports[0].c1_pass && reports[1].c1_pass && std::isfinite(c2f) &&
             drift <= ec.stability_tol;
    ctx.add(std::move(c));
    state.c2 = c2f;
  }
  write_quantity_csv(ctx.out / "spectrum.csv", rows);
  ctx.spectrum = state;
}

// ---------------------------------------------------------------------------

void simulate(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  SimConfig sc = cfg.simulation_config();
  sc.seed = ctx.seed("simulator");
  const EnsembleResult r = simulate_ensemble(sc, observable_by_name(cfg.simulation.observable));
  write_series_csv(ctx.out / "series.csv", r.series);
  if (cfg.simulation.trajectory_paths > 0) {
    write_trajectory_csv(ctx.out / "trajectories.csv", sc, cfg.simulation.trajectory_paths);
  }
  Check c{"simulation", true, false, Json::object()};
  c.values = {{"observable", cfg.simulation.observable},
              {"paths", sc.n_paths},
              {"aborted_paths", r.aborted_paths},
              {"final_mean", r.series.values.back()},
              {"final_stderr", r.series.stderr_.back()}};
  ctx.add(std::move(c));

  // Closed form for free rotational diffusion: E[cos θ_t] = e^{−σ²t/2} cos θ0.
  const bool trig = cfg.simulation.observable == "cos_theta" || cfg.simulation.observable == "sin_theta";
  if (cfg.potential.kind == "flat" && trig && sc.initial_point) {
    const double th0 = sc.initial_point->theta();
    const double base = cfg.simulation.observable == "cos_theta" ? std::cos(th0) : std::sin(th0);
    double worst = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < r.series.size(); ++i) {
      const double exact = base * std::exp(-0.5 * cfg.sigma * cfg.sigma * r.series.times[i]);
      const double dev = std::abs(r.series.values[i] - exact);
      const double se = r.series.stderr_[i];
      if (se > 0.0) worst = std::max(worst, dev / se);
      if (dev > 3.0 * se + 1e-12) ok = false;
    }
    Check cf{"closed_form_rotation", ok, false, Json::object()};
    cf.values = {{"max_deviation_in_stderr", worst}, {"threshold", 3.0}};
    ctx.add(std::move(cf));
  }
}

// ---------------------------------------------------------------------------

void stationarity(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  SimConfig sc = cfg.simulation_config();
  sc.dt = cfg.stationarity.dt;
  sc.seed = ctx.seed("simulator.stationarity");
  sc.initial_point.reset();
  const StationarityReport r = stationarity_test(sc, cfg.stationarity.burn_in,
                                                 cfg.stationarity.n_samples, cfg.stationarity.alpha);
  Json j = {{"samples", r.samples},     {"burn_in", cfg.stationarity.burn_in},
            {"dt", sc.dt},              {"chi2", r.chi2},
            {"chi2_dof", r.chi2_dof},   {"chi2_p_value", r.chi2_p_value},
            {"ks_statistic", r.ks_statistic}, {"ks_p_value", r.ks_p_value},
            {"alpha", r.alpha},         {"mirrored", sc.mirrored},
            {"pass", r.pass}};
  write_text(ctx.out / "stationarity.json", j.dump(2) + "\n");
  Check c{"stationarity", r.pass, false, Json::object()};
  c.values = j;
  ctx.add(std::move(c));
}

// ---------------------------------------------------------------------------

void rates(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  if (!ctx.spectrum) spectrum(ctx);
  const SpectrumState& sp = *ctx.spectrum;

  const auto& ac = cfg.autocorrelation;
  SimConfig sc = cfg.simulation_config();
  sc.dt = ac.dt;
  sc.seed = ctx.seed("simulator.autocorrelation");
  sc.initial_point.reset();
  AutocovarianceOptions opts;
  opts.burn_in = ac.burn_in;
  opts.t_total = ac.t_total;
  opts.lag_step = ac.lag_step;
  opts.max_lag = ac.max_lag;
  opts.batches = ac.batches;
  const ObservableSeries cov = stationary_autocovariance(sc, observable_by_name(ac.observable), opts);
  write_series_csv(ctx.out / "autocovariance.csv", cov);
  const OscillationFit fit = damped_oscillation_fit(cov, {ac.fit_t_min, ac.fit_t_max});

  const double c2 = cfg.rates.c2_override > 0.0 ? cfg.rates.c2_override : sp.c2;
  RateReport report = make_rate_report(cfg.sigma, sp.lambda, c2);
  if (cfg.rates.c2_override > 0.0) report.c2_estimate.provenance = Provenance::Formula;
  report.gap_spectral = TaggedValue{sp.gap, Provenance::GridEstimate};
  report.kappa_empirical = TaggedValue{fit.rate, Provenance::MonteCarlo};
  const Validation v = validate(report, cfg.rates.tol);

  Json rj = to_json(report);
  rj["validate"] = {{"pass", v.pass}, {"tol", v.tol}, {"kappa2_below_gap", v.below_gap},
                    {"kappa2_below_empirical", v.below_empirical}};
  rj["empirical_fit"] = {{"observable", ac.observable}, {"omega", fit.omega},
                         {"r_squared", fit.r_squared}, {"points", fit.points},
                         {"window", {ac.fit_t_min, ac.fit_t_max}}};
  write_text(ctx.out / "rate_report.json", rj.dump(2) + "\n");
  write_text(ctx.out / "rate_report.csv", rate_csv_header() + "\n" + rate_csv_row(report) + "\n");

  const double rel = std::abs(fit.rate - sp.gap) / sp.gap;
  Check consistency{"rate_consistency", rel <= 0.2, false, Json::object()};
  consistency.values = {{"kappa_empirical", fit.rate}, {"gap_spectral", sp.gap},
                        {"relative_difference", rel}, {"threshold", 0.2}};
  ctx.add(std::move(consistency));

  Check c{"rates_validate", v.pass && report.kappa1.value >= 1.0 && report.kappa2.value > 0.0,
          false, Json::object()};
  c.values = {{"kappa1", report.kappa1.value},  {"kappa2", report.kappa2.value},
              {"delta_star", report.delta_star.value}, {"gap_spectral", sp.gap},
              {"kappa_empirical", fit.rate},     {"tol", v.tol},
              {"label", RateBound::label}};
  ctx.add(std::move(c));
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunOutcome run(const RunConfig& cfg, bool echo) {
  RunOutcome outcome;
  const fs::path out = cfg.output_dir;
  const std::string started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Context> ctx;
  try {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ConfigError("output_dir: cannot create " + out.string() + ": " + ec.message());
    fs::remove(out / "FAILED", ec);
    write_text(out / "resolved.toml", to_toml(cfg));
    ctx.emplace(Context{cfg, cfg.potential_spec(), out, echo, {}, std::nullopt, Json::object()});

    auto stage = [&](const char* name, void (*fn)(Context&)) {
      const auto s0 = std::chrono::steady_clock::now();
      fn(*ctx);
      ctx->timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
    };
    switch (cfg.command) {
      case Command::VerifyIdentities: stage("verify-identities", verify_identities); break;
      case Command::Spectrum: stage("spectrum", spectrum); break;
      case Command::Simulate: stage("simulate", simulate); break;
      case Command::Stationarity: stage("stationarity", stationarity); break;
      case Command::Rates: stage("rates", rates); break;
      case Command::FullReport:
        stage("verify-identities", verify_identities);
        stage("spectrum", spectrum);
        stage("stationarity", stationarity);
        stage("rates", rates);
        break;
    }
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitConfig;
    outcome.error = e.what();
  } catch (const InputError& e) {
    outcome.exit_code = kExitConfig;
    outcome.error = e.what();
  } catch (const NumericalError& e) {
    outcome.exit_code = kExitNumerical;
    outcome.error = e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = kExitNumerical;
    outcome.error = e.what();
  }
  if (ctx) outcome.checks = ctx->checks;
  bool all_pass = outcome.error.empty();
  for (const Check& c : outcome.checks) all_pass = all_pass && c.pass;
  if (outcome.exit_code == kExitPass && !all_pass) outcome.exit_code = kExitCheckFailed;

  // Artifacts are only written when the output directory exists.
  std::error_code ec;
  if (!fs::is_directory(out, ec)) return outcome;
  try {
    Json summary;
    summary["command"] = to_string(cfg.command);
    summary["pass"] = all_pass;
    summary["exit_code"] = outcome.exit_code;
    Json checks = Json::array();
    for (const Check& c : outcome.checks) {
      checks.push_back({{"name", c.name}, {"status", c.skipped ? "SKIP" : c.pass ? "PASS" : "FAIL"},
                        {"values", c.values}});
    }
    summary["checks"] = checks;
    if (!outcome.error.empty()) summary["error"] = outcome.error;
    write_text(out / "summary.json", summary.dump(2) + "\n");

    Json meta = {{"started", started},
                 {"finished", utc_timestamp()},
                 {"wall_seconds",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                 {"threads", cfg.threads},
                 {"stage_seconds", ctx ? ctx->timings : Json::object()}};
    write_text(out / "meta.json", meta.dump(2) + "\n");
    if (outcome.exit_code != kExitPass) {
      std::string why = outcome.error;
      for (const Check& c : outcome.checks) {
        if (!c.pass) why += (why.empty() ? "" : "\n") + std::string("check failed: ") + c.name;
      }
      write_text(out / "FAILED", why + "\n");
    }
  } catch (const std::exception& e) {
    if (outcome.error.empty()) outcome.error = e.what();
    if (outcome.exit_code == kExitPass) outcome.exit_code = kExitConfig;
  }
  return outcome;
}

}  // namespace se2hypo
