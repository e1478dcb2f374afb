#pragma once

#include <string>

#include "repro/rundir.hpp"

namespace repro {

// Exit-code contract shared by all commands:
//   0 success, 2 user/input error, 3 replay miss, 4 stage failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 2;
inline constexpr int kExitReplayMiss = 3;
inline constexpr int kExitStageFailure = 4;

int cmd_fingerprint(const RunConfig& config);
int cmd_reproduce(const RunConfig& config);
int cmd_score(const RunConfig& config, const std::string& rubric_path);
int cmd_report(const std::string& run_dir);

}  // namespace repro
