#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hiersearch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitEmptyResult = 3;
inline constexpr int kExitNumerical = 4;

/// Entry point shared by the `hiersearch` binary and the tests. `args`
/// excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hiersearch::cli
