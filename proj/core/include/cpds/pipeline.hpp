#pragma once

#include <exception>
#include <string>
#include <vector>

#include "cpds/config.hpp"

namespace cpds {

// The CLI surface, callable in-process.
enum class Command {
  CheckModel,    // structural + conservativity checks
  Solve,         // backward value sweep (snapshots + manifest)
  Synthesize,    // greedy trajectory from stored snapshots
  Baseline,      // fixed reference control, with a dt/100 cross-check
  EscapeReport,  // invariant-escape census over a step-size sweep
  Full           // baseline + solve + synthesize + escape + comparison
};

Command command_from_name(const std::string& name);
const char* command_name(Command c);

struct PipelineResult {
  std::string summary;                 // the text also placed in summary.txt
  std::vector<std::string> artifacts;  // files written
};

// Execute one command.  Throws ConfigError / DataError / NumericError; the
// CLI maps these to exit codes via exit_code_for.
PipelineResult run_pipeline(const RunConfig& config, Command command);

// Exit-code contract: 0 success, 1 usage/configuration, 2 invalid data,
// 3 numerical failure (also the fallback for unexpected errors).
int exit_code_for(const std::exception& e);

}  // namespace cpds
