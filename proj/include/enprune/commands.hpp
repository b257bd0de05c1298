#pragma once

#include <map>
#include <string>

#include "enprune/run_config.hpp"

namespace enprune {

struct CommandResult {
    int exit_code = 0;
    std::string run_dir;
    std::map<std::string, std::string> artifacts;  // name -> path
    std::map<std::string, double> metrics;
};

// Dispatches cfg.command: train, search, prune, finetune, scratch, eval,
// entropy-report. Every command writes its artifacts plus a run manifest
// under a fresh directory below cfg.out_dir. Missing prerequisites throw
// std::invalid_argument with a remediation hint.
CommandResult run_command(const RunConfig& cfg);

}  // namespace enprune
