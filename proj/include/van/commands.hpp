// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace van {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2, kExitVerifyFailed = 3 };

/// Entry point for the `van` tool: gen | train | eval | verify | plotdata.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace van
