#pragma once

// Command-line entry point. Exit codes: 0 success / no flags, 2 usage or input
// error, 3 interruption flags raised, 4 backend failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace trafficlens::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kFlags = 3;
inline constexpr int kBackend = 4;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace trafficlens::cli
