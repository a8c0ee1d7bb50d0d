#pragma once

#include <string>
#include <vector>

namespace quantlab::cli {

// Exit codes. Failures are reported only through these; partial output files
// are never left behind (all CSV writes are atomic).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitMalformedDump = 3;
inline constexpr int kExitInvariant = 4;

// Runs the quantlab command line. argv excludes the program name.
int run(const std::vector<std::string>& args);

int run(int argc, char** argv);

}  // namespace quantlab::cli
