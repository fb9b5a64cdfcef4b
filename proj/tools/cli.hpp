#pragma once

// Command-line front end: generate, train, evaluate, compare, inspect.
// Exit codes: 0 success, 2 configuration, 3 numerical failure, 4 data.

#include <ostream>

namespace gasrom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitData = 4;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gasrom::cli
