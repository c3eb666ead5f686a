#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "kslab/config.hpp"
#include "kslab/monitors.hpp"

namespace kslab {

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitBreakdown = 3, kExitNoProfile = 4 };

struct CommandOptions {
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> resume;
  bool quiet = false;
};

struct SimulationOutcome {
  int exit_code = kExitOk;
  nlohmann::json report;
  RunResult result;
  RunAnalysis analysis;
  std::optional<CriterionReport> criterion;
  std::vector<std::string> checkpoints;
};

/// Runs one configuration and writes monitors.csv, report.json, profile.csv and
/// checkpoints/ under options.out.
SimulationOutcome simulate(const RunConfig& config, const CommandOptions& options);

int cmd_simulate(const RunConfig& config, const CommandOptions& options);
int cmd_selfsimilar(const RunConfig& config, const CommandOptions& options);
int cmd_sweep(const RunConfig& config, const CommandOptions& options);
int cmd_validate(const RunConfig& config, const CommandOptions& options);

/// Parses argv (subcommand plus --config/--out/--resume/--quiet), dispatches and maps
/// exceptions to exit codes.
int run_cli(int argc, char** argv);

}  // namespace kslab
