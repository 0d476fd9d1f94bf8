#pragma once

#include <iosfwd>

namespace sideguess {

/// Exit statuses of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitCap = 3;

/// Entry point of the `sideguess` tool. Verbs: exponent, rd, renyi, bounds,
/// oracle, sweep. Reports go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sideguess
