#pragma once

#include <string>
#include <vector>

namespace fluidsim {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 success, 2 validation failure, 3 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args); // args without argv[0]

} // namespace fluidsim
