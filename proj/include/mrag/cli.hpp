#pragma once

#include <string>
#include <vector>

namespace mrag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitPartial = 2;
inline constexpr int kExitUsage = 64;

/// Entry point behind the `mrag` binary. `args` excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace mrag::cli
