#pragma once

#include <array>
#include <iosfwd>
#include <string_view>

namespace cesplan::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 1,
  kInfeasible = 2,
  kIoError = 3,
  kConfigError = 4,
};

/// Entry point of the `cesplan` tool. Subcommands: plan, baseline, validate,
/// ahp, gen-fixture. Writes human-readable output to `out`, diagnostics to
/// `err`, and returns one of the exit codes above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Applies the CESPLAN_LOG level (trace, debug, info, warn, error, off).
void configure_logging_from_env();

/// "1/9,4/9,4/9" or "0.2,0.3,0.5". Throws Error{InvalidWeights}.
std::array<double, 3> parse_weights(std::string_view text);

}  // namespace cesplan::cli
