#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nsarm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (without the program name). Diagnostics go to `err`,
// progress and summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nsarm::cli
