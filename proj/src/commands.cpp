#include "enprune/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "enprune/checkpoint.hpp"
#include "enprune/entropy.hpp"

namespace enprune {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> train_batch_paths(const std::string& dir) {
    std::vector<std::string> paths;
    for (int i = 1; i <= 5; ++i) {
        const std::string p = dir + "/data_batch_" + std::to_string(i) + ".bin";
        if (fs::exists(p)) paths.push_back(p);
    }
    return paths;
}

SplitDataset load_splits(const RunConfig& cfg, int64_t calibration_size, ChannelStats* stats_out) {
    if (cfg.data_dir.empty())
        throw std::invalid_argument(
            "no --data-dir given; point it at CIFAR-10 binary batches (data_batch_*.bin, "
            "test_batch.bin). tools/make_dataset generates a synthetic stand-in corpus.");
    const auto train_paths = train_batch_paths(cfg.data_dir);
    const std::string test_path = cfg.data_dir + "/test_batch.bin";
    if (train_paths.empty() || !fs::exists(test_path))
        throw std::invalid_argument("data dir '" + cfg.data_dir +
                                    "' lacks data_batch_1.bin/test_batch.bin; generate them with "
                                    "tools/make_dataset or download CIFAR-10 binaries.");
    Dataset train_pool = load_cifar10(train_paths);
    Dataset test_pool = load_cifar10({test_path});
    const ChannelStats stats = compute_channel_stats(train_pool);
    standardize(train_pool, stats);
    standardize(test_pool, stats);
    if (stats_out) *stats_out = stats;

    SplitSizes sizes;
    sizes.train = cfg.train_size;
    sizes.test = cfg.test_size;
    sizes.mini_val = cfg.mini_val_size;
    sizes.calibration = calibration_size;
    return subset(train_pool, test_pool, sizes, cfg.seed);
}

std::string make_run_dir(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    if (!cfg.run_name.empty()) {
        const std::string dir = cfg.out_dir + "/" + cfg.run_name;
        if (fs::exists(dir))
            throw std::invalid_argument("run directory '" + dir +
                                        "' already exists; pick a fresh --run-name");
        fs::create_directories(dir);
        return dir;
    }
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::gmtime(&tt));
    std::string base = cfg.out_dir + "/" + stamp + "-" + cfg.command;
    std::string dir = base;
    for (int n = 2; fs::exists(dir); ++n) dir = base + "-" + std::to_string(n);
    fs::create_directories(dir);
    return dir;
}

ModelGraph require_checkpoint(const RunConfig& cfg, const std::string& hint) {
    if (cfg.checkpoint.empty())
        throw std::invalid_argument("missing --checkpoint; " + hint);
    if (!fs::exists(cfg.checkpoint))
        throw std::invalid_argument("checkpoint '" + cfg.checkpoint + "' does not exist; " + hint);
    return load_checkpoint(cfg.checkpoint);
}

SparsityPlan require_plan(const RunConfig& cfg, const std::string& hint) {
    if (cfg.plan_file.empty()) throw std::invalid_argument("missing --plan; " + hint);
    if (!fs::exists(cfg.plan_file))
        throw std::invalid_argument("plan '" + cfg.plan_file + "' does not exist; " + hint);
    return load_plan(cfg.plan_file);
}

void write_metrics(const std::string& path, const std::map<std::string, double>& metrics) {
    std::ofstream os(path);
    char buf[64];
    for (const auto& [k, v] : metrics) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        os << k << " = " << buf << "\n";
    }
}

void add_history(CommandResult& res, const std::vector<EpochStats>& history,
                 const std::string& dir) {
    const std::string path = dir + "/history.csv";
    write_history_csv(history, path);
    res.artifacts["history"] = path;
    if (!history.empty()) {
        res.metrics["final_test_acc"] = history.back().test_acc;
        double best = 0.0;
        for (const auto& e : history) best = std::max(best, e.test_acc);
        res.metrics["best_test_acc"] = best;
        res.metrics["final_train_loss"] = history.back().train_loss;
    }
}

}  // namespace

CommandResult run_command(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    CommandResult res;
    Manifest manifest = manifest_for(cfg);
    ChannelStats stats{};
    const std::string& cmd = cfg.command;

    // inputs are loaded before the run directory exists, so a failed command
    // leaves nothing behind
    std::string dir;
    auto open_run_dir = [&]() -> const std::string& {
        dir = make_run_dir(cfg);
        res.run_dir = dir;
        return dir;
    };

    TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    SearchConfig scfg = cfg.search;
    scfg.seed = cfg.seed;

    if (cmd == "train") {
        const SplitDataset data = load_splits(cfg, scfg.calibration_samples, &stats);
        const ModelGraph graph = build_preset(cfg.arch, 3, 32, 32, cfg.seed);
        open_run_dir();
        const TrainResult tr = train(graph, data.train, data.test, tcfg);
        const std::string ckpt = dir + "/baseline.ckpt";
        save_checkpoint(tr.graph, ckpt);
        res.artifacts["checkpoint"] = ckpt;
        add_history(res, tr.history, dir);
    } else if (cmd == "search") {
        const ModelGraph baseline = require_checkpoint(
            cfg, "run `enprune train` first and pass --checkpoint <run>/baseline.ckpt");
        const SplitDataset data = load_splits(cfg, scfg.calibration_samples, &stats);
        open_run_dir();
        const std::string log_path = dir + "/search_log.csv";
        std::ofstream log(log_path);
        DdpgAgent agent(DdpgAgent::Config{});
        const SearchResult sr = search(scfg, baseline, data, &log, &agent);
        log.close();
        res.artifacts["search_log"] = log_path;

        const std::string plan_path = dir + "/best_plan.tsv";
        save_plan(sr.best.plan, plan_path);
        res.artifacts["plan"] = plan_path;

        const std::string pruned_path = dir + "/pruned_best.ckpt";
        save_checkpoint(sr.best_pruned, pruned_path);
        res.artifacts["pruned_checkpoint"] = pruned_path;

        auto entries = agent.state_entries();
        entries.push_back(CheckpointEntry::ints("best_episode", {sr.best_episode}));
        entries.push_back(CheckpointEntry::floats("best_reward", {1},
                                                  {static_cast<float>(sr.best.reward)}));
        const std::string agent_path = dir + "/search_state.ckpt";
        save_entries(agent_path, entries);
        res.artifacts["search_state"] = agent_path;

        res.metrics["best_reward"] = sr.best.reward;
        res.metrics["best_preserved_ratio"] = sr.best.preserved_ratio;
        res.metrics["best_episode"] = static_cast<double>(sr.best_episode);
    } else if (cmd == "prune") {
        const ModelGraph baseline = require_checkpoint(
            cfg, "pass the baseline checkpoint whose plan you want to apply");
        const SparsityPlan plan =
            require_plan(cfg, "pass a plan file (e.g. best_plan.tsv from `enprune search`)");
        const SplitDataset data = load_splits(cfg, scfg.calibration_samples, &stats);
        open_run_dir();
        PruningEnv env(baseline, data, scfg);
        const ModelGraph pruned = env.prune_with(plan);
        const std::string ckpt = dir + "/pruned.ckpt";
        save_checkpoint(pruned, ckpt);
        res.artifacts["checkpoint"] = ckpt;
        res.metrics["preserved_ratio"] = preserved_ratio(pruned, baseline);
        res.metrics["parameters"] = static_cast<double>(parameter_count(pruned));
    } else if (cmd == "finetune") {
        const ModelGraph pruned = require_checkpoint(
            cfg, "run `enprune search` (or `enprune prune`) first and pass the pruned checkpoint");
        const SplitDataset data = load_splits(cfg, scfg.calibration_samples, &stats);
        open_run_dir();
        const TrainResult tr = fine_tune(pruned, data.train, data.test, tcfg);
        const std::string ckpt = dir + "/finetuned.ckpt";
        save_checkpoint(tr.graph, ckpt);
        res.artifacts["checkpoint"] = ckpt;
        add_history(res, tr.history, dir);
    } else if (cmd == "scratch") {
        const ModelGraph baseline = require_checkpoint(
            cfg, "pass the baseline checkpoint that defines the unpruned architecture");
        const SparsityPlan plan =
            require_plan(cfg, "pass the plan file defining the architecture to train");
        const SplitDataset data = load_splits(cfg, scfg.calibration_samples, &stats);
        open_run_dir();
        const TrainResult tr = train_from_scratch(plan, baseline, data.train, data.test, tcfg);
        const std::string ckpt = dir + "/scratch.ckpt";
        save_checkpoint(tr.graph, ckpt);
        res.artifacts["checkpoint"] = ckpt;
        add_history(res, tr.history, dir);
        res.metrics["parameters"] = static_cast<double>(parameter_count(tr.graph));
    } else if (cmd == "eval") {
        const ModelGraph graph = require_checkpoint(cfg, "pass any saved model checkpoint");
        const SplitDataset data = load_splits(cfg, scfg.calibration_samples, &stats);
        open_run_dir();
        res.metrics["test_acc"] = evaluate(graph, data.test);
    } else if (cmd == "entropy-report") {
        const ModelGraph graph = require_checkpoint(cfg, "pass any saved model checkpoint");
        const SplitDataset data = load_splits(cfg, cfg.report_samples, &stats);
        open_run_dir();
        EntropyConfig ec;
        ec.bins = scfg.bins;
        const EntropyReport report = network_entropy_report(graph, data.calibration.images, ec);
        const std::string csv = dir + "/entropy_report.csv";
        std::ofstream os(csv);
        os << "layer_id,mean_ame,valid_channels,excluded_channels\n";
        char buf[96];
        for (const auto& row : report.per_layer) {
            std::snprintf(buf, sizeof(buf), "%lld,%.6f,%lld,%lld\n",
                          static_cast<long long>(row.layer_id), row.mean_ame,
                          static_cast<long long>(row.valid_channels),
                          static_cast<long long>(row.excluded_channels));
            os << buf;
        }
        res.artifacts["entropy_report"] = csv;
        res.metrics["network_mean_ame"] = report.network_mean;
        res.metrics["bins"] = static_cast<double>(report.bins);
    } else {
        throw std::invalid_argument(
            "unknown command '" + cmd +
            "' (train|search|prune|finetune|scratch|eval|entropy-report)");
    }

    const std::string metrics_path = dir + "/metrics.txt";
    write_metrics(metrics_path, res.metrics);
    res.artifacts["metrics"] = metrics_path;

    manifest.add("data.mean_r", stats.mean[0]);
    manifest.add("data.mean_g", stats.mean[1]);
    manifest.add("data.mean_b", stats.mean[2]);
    manifest.add("data.stdev_r", stats.stdev[0]);
    manifest.add("data.stdev_g", stats.stdev[1]);
    manifest.add("data.stdev_b", stats.stdev[2]);
    for (const auto& [name, path] : res.artifacts) manifest.add("artifact." + name, path);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.add("wall_time_s", wall);
    manifest.write(dir + "/manifest.txt");

    std::cout << cmd << ": run dir " << dir << "\n";
    for (const auto& [k, v] : res.metrics) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        std::cout << "  " << k << " = " << buf << "\n";
    }
    return res;
}

}  // namespace enprune
