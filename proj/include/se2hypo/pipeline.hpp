#pragma once

// Batch pipelines behind the command-line front-end.

#include <string>
#include <vector>

#include "json.hpp"
#include "se2hypo/config.hpp"

namespace se2hypo {

enum ExitCode : int { kExitPass = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitNumerical = 3 };

struct Check {
  std::string name;
  bool pass = false;
  bool skipped = false;
  nlohmann::ordered_json values = nlohmann::ordered_json::object();
};

struct RunOutcome {
  int exit_code = kExitPass;
  std::vector<Check> checks;
  std::string error;  // set when the run stopped on an exception
};

/// Runs cfg.command, writing artifacts into cfg.output_dir: resolved.toml, module CSV/JSON
/// files, summary.json (PASS/FAIL per check), meta.json (timestamps) and a FAILED marker
/// when the run fails. Data artifacts depend only on the resolved configuration.
RunOutcome run(const RunConfig& cfg, bool echo = true);

}  // namespace se2hypo
