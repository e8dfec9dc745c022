#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "se2hypo/config.hpp"
#include "se2hypo/errors.hpp"
#include "se2hypo/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace se2hypo;

  CLI::App app{"Hypocoercive SE(2) Langevin dynamics: identities, spectra, simulation, rates"};
  app.require_subcommand(0, 1);

  std::string config_file;
  std::optional<double> sigma;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string output_dir;
  std::vector<std::string> sets;
  bool quiet = false;

  app.add_option("-c,--config", config_file, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--sigma", sigma, "noise strength (> 0)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads for path simulation");
  app.add_option("-o,--output-dir", output_dir, "artifact directory (overrides SE2HYPO_OUTPUT_DIR)");
  app.add_option("--set", sets, "override any key, e.g. --set discretization.n1=48")
      ->take_all();
  app.add_flag("-q,--quiet", quiet, "suppress per-check lines");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"verify-identities", "symbolic and discrete operator identities, coercivity"},
      {"spectrum", "Poincare constant, spectral gap, elliptic constants"},
      {"simulate", "ensemble average of an observable"},
      {"stationarity", "invariance of the Gibbs measure under the dynamics"},
      {"rates", "hypocoercive rate bound validated against measured rates"},
      {"full-report", "verify-identities, spectrum, stationarity and rates in sequence"}};
  app.fallthrough();
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  ConfigSources sources;
  sources.file = config_file;
  if (!app.get_subcommands().empty()) {
    sources.overrides.push_back("command=\"" + app.get_subcommands().front()->get_name() + "\"");
  }
  if (sigma) sources.overrides.push_back(fmt::format("sigma={}", *sigma));
  if (seed) sources.overrides.push_back(fmt::format("seed={}", *seed));
  if (threads) sources.overrides.push_back(fmt::format("threads={}", *threads));
  for (const auto& s : sets) sources.overrides.push_back(s);

  RunConfig cfg;
  try {
    if (!output_dir.empty()) {
      // Quoted here so any path survives the TOML value parser.
      std::string quoted = "\"";
      for (char c : output_dir) {
        if (c == '"' || c == '\\') quoted += '\\';
        quoted += c;
      }
      sources.overrides.push_back("output_dir=" + quoted + "\"");
    }
    cfg = resolve_config(sources);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return kExitConfig;
  } catch (const InputError& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return kExitConfig;
  }

  const RunOutcome outcome = run(cfg, !quiet);
  if (!outcome.error.empty()) fmt::print(stderr, "error: {}\n", outcome.error);
  fmt::print("{} -> {} (exit {})\n", to_string(cfg.command), cfg.output_dir, outcome.exit_code);
  return outcome.exit_code;
}
