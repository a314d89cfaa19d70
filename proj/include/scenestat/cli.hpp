#pragma once

#include <iosfwd>

namespace scenestat::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kSchema = 3;
inline constexpr int kInvariant = 4;

// Entry point for the `scenestat` tool: stats, mine, build-freq, predict,
// eval and validate.
int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace scenestat::cli
