#pragma once

// Euler–Maruyama integration of the SE(2) Langevin dynamics with generator L = S − A:
//   dξ = −v(θ) dt,   dθ = (∇Φ(ξ)·v⊥(θ)) dt + σ dW.
// The mirrored convention (dξ = +v dt, dθ = −(∇Φ·v⊥) dt + σ dW) generates S + A.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "se2hypo/geometry.hpp"
#include "se2hypo/potential.hpp"

namespace se2hypo {

using Rng = std::mt19937_64;

struct SimConfig {
  double sigma = 1.0;
  PotentialSpec potential = PotentialSpec::quadratic(1.0, 1.0);
  double dt = 1e-3;
  double t_final = 1.0;
  int n_paths = 1000;
  std::uint64_t seed = 0;
  /// Starting point; nullopt draws each path from the equilibrium sampler.
  std::optional<GroupPoint> initial_point = GroupPoint{};
  /// Spacing of recorded times (rounded to a whole number of steps).
  double sample_interval = 0.1;
  bool mirrored = false;
  int threads = 1;

  int steps() const;
  int record_every() const;
  /// Throws ConfigError naming the violated constraint.
  void validate() const;
};

struct ObservableSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> stderr_;

  std::size_t size() const noexcept { return times.size(); }
  /// Throws InputError unless lengths agree, times increase and stderr ≥ 0.
  void validate() const;
};

using Observable = std::function<double(const GroupPoint&)>;

/// Registered observables: one, cos_theta, sin_theta, xi1, xi2.
Observable observable_by_name(const std::string& name);
std::vector<std::string> observable_names();

/// One Euler–Maruyama step. Throws NumericalError (with the state) on a non-finite drift.
GroupPoint step(const GroupPoint& state, const SimConfig& cfg, double noise);

/// Exact draws from μΦ by rejection sampling: Gaussian envelope for built-in kinds
/// (exact Gaussian for quadratic Φ), uniform envelope on the table for tabulated Φ.
class EquilibriumSampler {
 public:
  /// Throws ConfigError for non-normalizable Φ or predicted acceptance below 1e−3.
  explicit EquilibriumSampler(const PotentialSpec& potential);

  GroupPoint draw(Rng& rng) const;
  double acceptance() const noexcept { return acceptance_; }

 private:
  enum class Mode { Gaussian, GaussianEnvelope, UniformEnvelope };
  PotentialSpec potential_;
  Mode mode_ = Mode::Gaussian;
  double scale1_ = 1.0;  // Gaussian standard deviations
  double scale2_ = 1.0;
  double log_bound_ = 0.0;  // log of the envelope constant
  double phi_min_ = 0.0;
  Box box_;
  double acceptance_ = 1.0;
};

struct EnsembleResult {
  ObservableSeries series;
  int aborted_paths = 0;
};

/// Ensemble mean of `observable` at the recorded times. Per-path streams come from
/// (seed, path index) and chunks are combined in index order, so the result does not
/// depend on `threads`. More than 1% aborted paths throws NumericalError.
EnsembleResult simulate_ensemble(const SimConfig& cfg, const Observable& observable);

/// Final states of all paths at t_final (equilibrium or point start).
std::vector<GroupPoint> simulate_endpoints(const SimConfig& cfg);

struct StationarityReport {
  std::size_t samples = 0;
  double chi2 = 0.0;
  int chi2_dof = 0;
  double chi2_p_value = 0.0;
  double ks_statistic = 0.0;
  double ks_p_value = 0.0;
  double alpha = 0.01;
  bool pass = false;
};

/// χ² (16×16 quantile bins) on the ξ-marginal against Z⁻¹e^{−Φ} and Kolmogorov–Smirnov on
/// θ against the uniform law, both at level `alpha`.
StationarityReport stationarity_statistics(const PotentialSpec& potential,
                                           const std::vector<GroupPoint>& samples,
                                           double alpha = 0.01);

/// Runs `n_samples` equilibrium-started paths for `burn_in` time and tests the end states.
StationarityReport stationarity_test(const SimConfig& cfg, double burn_in, int n_samples,
                                     double alpha = 0.01);

/// Asymptotic Kolmogorov p-value for statistic d on n samples (Stephens' small-n correction).
double kolmogorov_p_value(double d, std::size_t n);

struct AutocovarianceOptions {
  double burn_in = 50.0;
  double t_total = 4.0e5;    // length of the stationary trajectory after burn-in
  double lag_step = 0.1;
  double max_lag = 12.0;
  int batches = 20;
};

/// Autocovariance of `observable` along one long stationary trajectory (path stream 0 of
/// cfg.seed, started from equilibrium); standard errors from batched means.
ObservableSeries stationary_autocovariance(const SimConfig& cfg, const Observable& observable,
                                           const AutocovarianceOptions& opts);

/// Cov(g(X_0), g(X_t)) across cfg.n_paths equilibrium-started paths.
ObservableSeries ensemble_autocovariance(const SimConfig& cfg, const Observable& observable);

struct FitWindow {
  double t_min = 0.0;
  double t_max = 0.0;
};

struct DecayFit {
  double rate = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Least-squares slope of log|value − limit| against t over the window; rate = −slope.
/// Throws FitError on fewer than 5 points or a nonpositive |value − limit|.
DecayFit decay_rate_fit(const ObservableSeries& series, FitWindow window, double limit = 0.0);

struct OscillationFit {
  double rate = 0.0;   // envelope decay rate of the slowest root
  double omega = 0.0;  // angular frequency (0 for real roots)
  double r_squared = 0.0;
  int points = 0;
  std::complex<double> root{0.0, 0.0};
};

/// Second-order linear-prediction (Prony) fit c_{n+2} = a c_{n+1} + b c_n on equally
/// spaced samples in the window. Suited to oscillating correlations.
OscillationFit damped_oscillation_fit(const ObservableSeries& series, FitWindow window);

/// CSV `t,mean,stderr`.
void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series);

/// CSV `t,xi1,xi2,theta,path_id` for the first `n_paths` paths of cfg. Throws InputError
/// when the row count would exceed `max_rows`.
void write_trajectory_csv(const std::filesystem::path& path, const SimConfig& cfg, int n_paths,
                          std::size_t max_rows = 1'000'000);

}  // namespace se2hypo
