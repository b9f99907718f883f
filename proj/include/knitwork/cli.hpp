#pragma once

#include <iosfwd>

namespace knitwork {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace knitwork
