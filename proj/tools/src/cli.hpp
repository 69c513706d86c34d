#pragma once

#include <iosfwd>

namespace halfspec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses argv and runs one subcommand. Diagnostics go to `err`, reports
/// (inspect) to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace halfspec::cli
