#pragma once

// Run configuration: a TOML subset (tables, strings, integers, floats, booleans, comments)
// merged with command-line overrides and the SE2HYPO_OUTPUT_DIR environment variable.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "se2hypo/potential.hpp"
#include "se2hypo/simulator.hpp"
#include "se2hypo/spectral.hpp"

namespace se2hypo {

// ---------------------------------------------------------------------------
// TOML subset

using TomlValue = std::variant<bool, std::int64_t, double, std::string>;

struct TomlEntry {
  TomlValue value;
  int line = 0;
  int column = 0;
};

/// Flat map keyed by "table.key" (top-level keys have no prefix).
using TomlDocument = std::map<std::string, TomlEntry>;

/// Throws ConfigError "<source>:<line>:<column>: <message>" on malformed input.
TomlDocument parse_toml(const std::string& text, const std::string& source = "<string>");

// ---------------------------------------------------------------------------
// RunConfig

enum class Command { VerifyIdentities, Spectrum, Simulate, Stationarity, Rates, FullReport };
const char* to_string(Command c) noexcept;
Command parse_command(const std::string& s);

struct PotentialConfig {
  std::string kind = "quadratic";  // quadratic | double_well | flat | tabulated
  double a1 = 1.0;
  double a2 = 1.0;
  double height = 1.0;
  std::string table;  // CSV path for tabulated
};

struct PoincareConfig {
  int n = 64;
  double half_width = 6.0;  // 0 selects the potential's default box
  double boundary_tol = 1e-6;
  bool refine = true;
};

struct IdentitiesConfig {
  int samples = 200;
  int terms = 4;
  int max_degree = 3;
  int max_frequency = 3;
  int n = 32;
  int modes = 8;
  double half_width = 6.0;
  int structure_samples = 20;
  int coercivity_samples = 100;
};

struct SpectrumConfig {
  std::string method = "auto";
  int dense_limit = 1500;
  double shift = 0.1;
  int krylov_dim = 120;
  bool dump_matrices = false;
};

struct EllipticConfig {
  int samples = 200;
  int n_coarse = 24;
  int n_fine = 36;
  int modes = 8;
  double half_width = 6.0;
  double stability_tol = 0.2;
};

struct SimulationConfig {
  double dt = 1e-3;
  double t_final = 2.0;
  int n_paths = 10000;
  std::string observable = "cos_theta";
  std::string initial = "point";  // point | equilibrium
  double initial_xi1 = 0.0;
  double initial_xi2 = 0.0;
  double initial_theta = 0.0;
  double sample_interval = 0.1;
  bool mirrored = false;
  int trajectory_paths = 0;
};

struct StationarityConfig {
  double dt = 1e-3;
  double burn_in = 50.0;
  int n_samples = 10000;
  double alpha = 0.01;
};

struct AutocorrelationConfig {
  std::string observable = "xi1";
  double dt = 0.01;
  double burn_in = 50.0;
  double t_total = 4.0e5;
  double lag_step = 0.1;
  double max_lag = 12.0;
  int batches = 20;
  double fit_t_min = 0.0;
  double fit_t_max = 12.0;
};

struct RatesConfig {
  double tol = 0.15;
  double c2_override = 0.0;  // > 0 replaces the grid estimate
};

struct RunConfig {
  Command command = Command::VerifyIdentities;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::string output_dir = "se2hypo-out";
  int threads = 1;
  PotentialConfig potential;
  Discretization discretization{6.0, 6.0, 40, 40, 10, 40000, 1e-6};
  PoincareConfig poincare;
  IdentitiesConfig identities;
  SpectrumConfig spectrum;
  EllipticConfig elliptic;
  SimulationConfig simulation;
  StationarityConfig stationarity;
  AutocorrelationConfig autocorrelation;
  RatesConfig rates;

  /// Throws ConfigError naming the key and the violated constraint.
  void validate() const;
  PotentialSpec potential_spec() const;
  SimConfig simulation_config() const;
};

/// Applies `key = value` overrides in TOML syntax ("discretization.n1=48").
void apply_override(TomlDocument& doc, const std::string& assignment);

/// Builds a config from a parsed document; unknown keys throw ConfigError with position.
RunConfig config_from_toml(const TomlDocument& doc);

struct ConfigSources {
  std::filesystem::path file;          // optional TOML file
  std::vector<std::string> overrides;  // "key=value" from flags, applied last
  bool use_environment = true;
};

/// defaults < file < SE2HYPO_OUTPUT_DIR < flags. Validates the result.
RunConfig resolve_config(const ConfigSources& sources);

/// Canonical TOML rendering of every key (round-trips through parse_toml).
std::string to_toml(const RunConfig& cfg);

}  // namespace se2hypo
