#pragma once

#include <iosfwd>

namespace drfuse {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Entry point of the `drfuse` tool. Results go to `out` unless `--out` names a file.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drfuse
