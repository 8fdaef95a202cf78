#pragma once

#include <iosfwd>

#include "securefix/config.h"

namespace securefix {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFindings = 1;
inline constexpr int kUsage = 2;
inline constexpr int kEngineFailure = 3;
}  // namespace exit_code

/// Subcommands: scan, fix, inject, eval, rules. Machine output goes to `out`,
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, const Environment& env, std::ostream& out, std::ostream& err);

}  // namespace securefix
