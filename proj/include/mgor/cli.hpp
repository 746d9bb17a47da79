#pragma once

namespace mgor::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 ok, 1 other failure, 2 bad input or usage, 3 simulation diverged.
int run(int argc, char** argv);

} // namespace mgor::cli
