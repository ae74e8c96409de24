#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cellvar::cli {

enum ExitStatus : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

// Environment variable naming the first-level posterior cache directory.
inline constexpr const char* kCacheEnv = "CELLVAR_CACHE_DIR";

// Runs one command line (without the program name). Subcommands: synth, fit,
// study, truncate, rerun. Human-readable progress goes to `err`; a fatal error
// is reported there as a one-line JSON record {"error": {...}}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cellvar::cli
