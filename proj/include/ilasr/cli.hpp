#pragma once

#include <ostream>

namespace ilasr {

/// Exit codes of the command-line runner.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitConfig = 3, kExitRuntime = 4 };

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ilasr
