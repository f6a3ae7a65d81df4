#pragma once

#include <iosfwd>

namespace lrsql {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitBackend = 3;

// Entry point of the `lrsql` tool: slice, gen-dataset, infer, eval, pipeline.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lrsql
