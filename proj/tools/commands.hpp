#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace sli::cli {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr const char* kOutputEnv = "SLI_OUTPUT_DIR";

enum ExitCode { kOk = 0, kNegative = 1, kFailure = 2 };

struct RunOptions {
  int workers = 0;
  std::string output_directory;  // overrides the config and the environment
};

/// --output, then [output] directory, then $SLI_OUTPUT_DIR, then "sli-out".
std::string output_directory(const RunConfig& config, const RunOptions& options);

/// criterion, construct, density, reconstruct or simulate. Writes its files
/// and manifest.json into the output directory and returns the exit code;
/// errors propagate as sli::Error.
int run_command(const std::string& command, const RunConfig& config, const RunOptions& options, std::ostream& log);

const std::vector<std::string>& command_names();

/// Quick invariant suite; prints one PASS/FAIL line per check.
int run_selftest(const RunOptions& options, std::ostream& log);

}  // namespace sli::cli
