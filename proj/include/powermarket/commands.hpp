#pragma once

#include "powermarket/run_config.hpp"
#include "powermarket/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace powermarket {

enum ExitCode : int { exit_ok = 0, exit_run_error = 1, exit_config_error = 2 };

/// Writes every output table of a finished run into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config, const RunResult& result);

/// Executes one run and writes summary.json plus the CSV tables to
/// config.outputs.dir.
int run_command(const RunConfig& config, std::ostream& log);

/// Runs every sweep point (up to `parallelism` at a time) into run_NNN
/// subdirectories and writes sweep_summary.csv.
int sweep_command(const SweepConfig& sweep, std::ostream& log);

/// Reference-vs-fast engine comparison on the configured price process.
int check_command(const RunConfig& config, std::ostream& log);

/// `powermarket <run|sweep|check> [--config FILE] [--out DIR] [--key value ...]`
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace powermarket
