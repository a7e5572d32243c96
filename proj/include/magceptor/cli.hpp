#pragma once

#include <iosfwd>

namespace magceptor {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

inline constexpr unsigned long long kDefaultSeed = 1;

// Entry point of the `magceptor` binary (subcommands landscape, design, fsm,
// net, validate). Diagnostics go to `err` as one line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace magceptor
