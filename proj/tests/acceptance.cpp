// Acceptance suite: one PASS/FAIL line per criterion; non-zero exit if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "se2hypo/operator_algebra.hpp"
#include "se2hypo/pipeline.hpp"
#include "se2hypo/potential.hpp"
#include "se2hypo/simulator.hpp"
#include "se2hypo/spectral.hpp"

using namespace se2hypo;
namespace fs = std::filesystem;

namespace {

int failures = 0;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void report(const char* id, bool pass, const std::string& what) {
  fmt::print("{} {} {}\n", id, pass ? "PASS" : "FAIL", what);
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <class F>
void criterion(const char* id, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, fmt::format("exception: {}", e.what()));
  }
}

Discretization grid(int n, int modes, double half_width = 6.0) {
  Discretization d;
  d.half_width1 = d.half_width2 = half_width;
  d.n1 = d.n2 = n;
  d.modes = modes;
  return d;
}

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

const Check* find_check(const RunOutcome& r, const std::string& name) {
  for (const Check& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ac1() {
  Timer t;
  std::mt19937_64 rng(2024);
  double worst_exact = 0.0, worst_inv = 0.0;
  int checked = 0;
  for (double sigma : {0.5, 1.0, 2.0}) {
    const OperatorParams p{sigma, 1.0, 1.0};
    for (int i = 0; i < 200; ++i) {
      const TestFunction f = random_test_function(rng, {});
      const TestFunction g = random_test_function(rng, {4, 3, 3, true});
      worst_exact = std::max({worst_exact, verify_PiAPi(f, p), verify_APi(g, p),
                              verify_A2Pi(g, p), verify_G(g, p)});
      worst_inv = std::max(worst_inv, invariance_residual(f, p));
      ++checked;
    }
  }
  const double secs = t.seconds();
  report("AC1", worst_exact == 0.0 && worst_inv <= 1e-12 && secs < 10.0,
         fmt::format("symbolic identities: {} functions, max exact residual {:.3g}, "
                     "max invariance residual {:.3g} (<= 1e-12), {:.2f} s (< 10 s)",
                     checked, worst_exact, worst_inv, secs));
}

void ac2() {
  Timer t;
  const OperatorSet ops = assemble(1.0, PotentialSpec::quadratic(1, 1), grid(32, 8));
  const StructureReport s = check_structure(ops, 20, 31);
  const ProjectionReport p = verify_projection_identities(ops, 1e-10, 1e-8, 32);
  const double structure = std::max({s.s_symmetry, s.a_antisymmetry, s.pis_idempotence,
                                     s.pis_self_adjoint});
  const double secs = t.seconds();
  report("AC2",
         structure <= 1e-10 && p.pi_a_pi_norm <= 1e-10 && p.a2_minus_g_relative <= 1e-8 &&
             secs < 60.0,
         fmt::format("discrete structure at {}: S sym {:.2g}, A antisym {:.2g}, Pi_S idem {:.2g}, "
                     "Pi_S adj {:.2g} (<= 1e-10); |Pi A Pi| {:.2g} (<= 1e-10); "
                     "interior |Pi A^2 Pi - G|/|G| {:.2g} (<= 1e-8); {:.1f} s (< 60 s)",
                     ops.disc.id(), s.s_symmetry, s.a_antisymmetry, s.pis_idempotence,
                     s.pis_self_adjoint, p.pi_a_pi_norm, p.a2_minus_g_relative, secs));
}

void ac3() {
  Timer t;
  const OperatorSet ops = assemble(1.0, PotentialSpec::quadratic(1, 1), grid(32, 8));
  const double lambda_h = discrete_poincare_constant(ops);
  const CoercivityReport c = check_coercivity(ops, lambda_h, 100, 33);
  const NodeGrid g{Box::symmetric(6, 6), 64, 64};
  const double lambda = poincare_constant(PotentialSpec::quadratic(1, 1), g, false).lambda;
  const double secs = t.seconds();
  report("AC3",
         c.microscopic_holds && c.macroscopic_holds && std::abs(lambda - 1.0) <= 0.02 &&
             secs < 120.0,
         fmt::format("coercivity: microscopic exact on 100 samples ({}), min ratio {:.4g}; "
                     "macroscopic min ratio {:.4g} >= 0.95*Lambda_h/2 = {:.4g}; "
                     "Poincare 64x64 Lambda = {:.5f} (1 +- 2%); {:.1f} s (< 120 s)",
                     c.microscopic_holds ? "holds" : "violated", c.microscopic_min_ratio,
                     c.macroscopic_min_ratio, 0.95 * lambda_h / 2, lambda, secs));
}

void ac4() {
  const EllipticReport coarse =
      elliptic_estimate_check(assemble(1.0, PotentialSpec::quadratic(1, 1), grid(24, 8)), 200, 41);
  const EllipticReport fine =
      elliptic_estimate_check(assemble(1.0, PotentialSpec::quadratic(1, 1), grid(36, 8)), 200, 42);
  const double bound = 0.25 * (1 + 1e-6);
  const double c1 = std::max({coarse.c1_observed, coarse.c1_sup, fine.c1_observed, fine.c1_sup});
  const double change = std::abs(fine.c2_estimate - coarse.c2_estimate) / fine.c2_estimate;
  report("AC4",
         c1 <= bound && std::isfinite(coarse.c2_estimate) && std::isfinite(fine.c2_estimate) &&
             change <= 0.2,
         fmt::format("elliptic estimate: max c1 (200 samples + power iteration) {:.6f} <= {:.6f}; "
                     "c2 24x24 {:.4f}, 36x36 {:.4f}, relative change {:.3f} (<= 0.2)",
                     c1, bound, coarse.c2_estimate, fine.c2_estimate, change));
}

void ac5() {
  Timer t;
  SimConfig cfg;
  cfg.potential = PotentialSpec::flat();
  cfg.sigma = 1.0;
  cfg.dt = 1e-3;
  cfg.t_final = 2.0;
  cfg.sample_interval = 0.5;
  cfg.n_paths = 100000;
  cfg.seed = 51;
  cfg.threads = threads();
  const double th0 = 0.0;
  cfg.initial_point = GroupPoint(0, 0, th0);
  const ObservableSeries s = simulate_ensemble(cfg, observable_by_name("cos_theta")).series;
  bool ok = true;
  std::string detail;
  for (double target : {0.5, 1.0, 2.0}) {
    const auto it = std::find_if(s.times.begin(), s.times.end(),
                                 [&](double x) { return std::abs(x - target) < 1e-9; });
    if (it == s.times.end()) {
      ok = false;
      continue;
    }
    const std::size_t i = it - s.times.begin();
    const double exact = std::exp(-0.5 * target) * std::cos(th0);
    const double z = (s.values[i] - exact) / s.stderr_[i];
    ok = ok && std::abs(z) <= 3.0;
    detail += fmt::format(" t={}: {:.5f} vs {:.5f} ({:+.2f} SE);", target, s.values[i], exact, z);
  }
  const double secs = t.seconds();
  report("AC5", ok && secs < 60.0,
         fmt::format("closed-form rotation, 1e5 paths:{} {:.1f} s (< 60 s)", detail, secs));
}

}  // namespace

int main() {
  criterion("AC1", ac1);
  criterion("AC2", ac2);
  criterion("AC3", ac3);
  criterion("AC4", ac4);
  criterion("AC5", ac5);

  // AC6 and AC7 come from the end-to-end pipeline; AC8 reruns it and compares artifacts.
  const fs::path root = fs::temp_directory_path() / "se2hypo_acceptance";
  fs::remove_all(root);
  RunConfig cfg;
  cfg.command = Command::FullReport;
  cfg.threads = threads();
  cfg.output_dir = (root / "first").string();
  RunOutcome first;
  double first_secs = 0.0;
  criterion("AC6", [&] {
    Timer t;
    first = run(cfg, false);
    first_secs = t.seconds();
    if (!first.error.empty()) throw std::runtime_error(first.error);
    const Check* c = find_check(first, "stationarity");
    if (!c) throw std::runtime_error("stationarity check missing");
    const auto& v = c->values;
    report("AC6", c->pass,
           fmt::format("stationarity, quadratic(1,1), sigma 1, {} paths to t = {}: chi2 p = {:.4f}, "
                       "KS p = {:.4f} (both >= 0.01)",
                       v["samples"].get<int>(), v["burn_in"].get<double>(),
                       v["chi2_p_value"].get<double>(), v["ks_p_value"].get<double>()));
  });
  criterion("AC7", [&] {
    if (!first.error.empty()) throw std::runtime_error(first.error);
    const Check* c = find_check(first, "rate_consistency");
    const Check* v = find_check(first, "rates_validate");
    if (!c || !v) throw std::runtime_error("rate checks missing");
    const auto& cv = c->values;
    report("AC7", c->pass && v->pass && first_secs < 300.0,
           fmt::format("rate consistency: kappa_emp {:.4f} vs gap {:.4f}, relative difference "
                       "{:.3f} (<= 0.2); kappa2 {:.4f} validate {}; full report {:.1f} s (< 300 s)",
                       cv["kappa_empirical"].get<double>(), cv["gap_spectral"].get<double>(),
                       cv["relative_difference"].get<double>(),
                       v->values["kappa2"].get<double>(), v->pass ? "PASS" : "FAIL", first_secs));
  });
  criterion("AC8", [&] {
    RunConfig again = cfg;
    again.output_dir = (root / "second").string();
    run(again, false);
    int compared = 0, differing = 0;
    std::string names;
    for (const auto& e : fs::directory_iterator(root / "first")) {
      const auto name = e.path().filename();
      if (name == "meta.json") continue;
      std::string a = slurp(e.path()), b = slurp(root / "second" / name);
      if (name == "resolved.toml") {
        // the output directory itself is part of the resolved configuration
        const auto strip = [](std::string s) {
          const auto p = s.find("output_dir");
          return p == std::string::npos ? s : s.erase(p, s.find('\n', p) - p);
        };
        a = strip(a);
        b = strip(b);
      }
      ++compared;
      if (a != b) {
        ++differing;
        names += " " + name.string();
      }
    }
    report("AC8", compared >= 8 && differing == 0,
           fmt::format("determinism: {} artifacts compared byte-for-byte, {} differ{}", compared,
                       differing, names));
  });
  fs::remove_all(root);
  fmt::print("{} of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
