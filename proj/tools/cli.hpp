#pragma once

#include <ostream>

namespace simrep {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// simrep <subcommand> [--config PATH] [--out DIR] [--seed INT] [--format csv|svg|both]
/// Returns 0 on success, 1 on usage or validation errors, 2 on runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace simrep
