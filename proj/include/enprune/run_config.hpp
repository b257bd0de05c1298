#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "enprune/dataset.hpp"
#include "enprune/environment.hpp"
#include "enprune/trainer.hpp"

namespace enprune {

inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
    std::string command;
    std::string arch = "tinyvgg6";
    std::string data_dir;
    std::string out_dir = "runs";
    std::string run_name;  // optional; defaults to a timestamped directory
    uint64_t seed = 1;

    std::string checkpoint;  // input model for search/prune/finetune/scratch/eval/entropy-report
    std::string plan_file;   // input plan for prune/scratch

    int64_t train_size = 10000;
    int64_t test_size = 2000;
    int64_t mini_val_size = 1000;

    SearchConfig search;
    TrainConfig train;
    int64_t report_samples = 100;  // entropy-report batch size
};

// Line-oriented "key = value" configuration with [section] headers; '#'
// starts a comment. Returns "section.key" -> value.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Applies file values onto a RunConfig (command-line flags are applied on top
// by the CLI, so flags win).
void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& values);

struct Manifest {
    std::vector<std::pair<std::string, std::string>> rows;
    void add(const std::string& key, const std::string& value);
    void add(const std::string& key, int64_t value);
    void add(const std::string& key, uint64_t value);
    void add(const std::string& key, double value);
    void write(const std::string& path) const;
};

// Effective-configuration echo shared by every command's manifest.
Manifest manifest_for(const RunConfig& cfg);

}  // namespace enprune
