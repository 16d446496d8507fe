#pragma once

#include <string>
#include <vector>

#include "histo/error.hpp"

namespace histo::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitMissingInput = 3, kExitStageFailure = 4 };

/// Exit code for an error raised while loading config (in_stage = false) or
/// while a stage was running.
int exit_code_for(ErrorCode code, bool in_stage);

/// Entry point of the `histo` tool. Never throws.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace histo::cli
