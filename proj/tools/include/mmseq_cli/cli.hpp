#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmseq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitConvergence = 4;

// Runs one invocation; `args` excludes the program name. Results go to `out`
// (or to --out files), diagnostics to `err` as `error: <kind>: <detail>`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmseq::cli
