#pragma once

#include <ostream>

namespace fmgnn::cli {

/// Exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_data = 2;
inline constexpr int exit_divergence = 3;
inline constexpr int exit_internal = 4;

/// Runs one command line. Results go to `out`, progress and errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fmgnn::cli
