// Structured-pruning engine for chain CNNs: trains baselines, searches
// per-layer sparsity with a DDPG agent under a FLOPS budget, applies plans
// with least-squares weight reconstruction, fine-tunes, and reports
// activation entropy.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "enprune/commands.hpp"

using enprune::RunConfig;

namespace {

void add_common_options(CLI::App* cmd, RunConfig& cfg, std::string& config_path,
                        std::string& reward, bool& no_augment) {
    cmd->add_option("--config", config_path, "key = value config file (flags win)");
    cmd->add_option("--arch", cfg.arch, "architecture preset (tinyvgg6|vgg16)");
    cmd->add_option("--data-dir", cfg.data_dir, "directory with CIFAR-10 binary batches");
    cmd->add_option("--out", cfg.out_dir, "output root; runs go in fresh subdirectories");
    cmd->add_option("--run-name", cfg.run_name, "explicit run directory name");
    cmd->add_option("--seed", cfg.seed, "run seed; every artifact derives from it");
    cmd->add_option("--checkpoint", cfg.checkpoint, "input model checkpoint");
    cmd->add_option("--plan", cfg.plan_file, "input sparsity plan file");
    cmd->add_option("--reward", reward, "search reward (entropy|accuracy|random)");
    cmd->add_option("--flops-target", cfg.search.flops_target,
                    "fraction of FLOPS the pruned net may keep");
    cmd->add_option("--bins", cfg.search.bins, "entropy quantization bins");
    cmd->add_option("--episodes", cfg.search.episodes, "search episodes");
    cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
    cmd->add_option("--lr0", cfg.train.lr0, "initial learning rate");
    cmd->add_option("--batch-size", cfg.train.batch_size, "training batch size");
    cmd->add_flag("--no-augment", no_augment, "disable flip/crop augmentation");
    cmd->add_flag("--entropy-maximize", cfg.search.entropy_maximize,
                  "negative control: maximize activation entropy instead");
    cmd->add_option("--sigma0", cfg.search.sigma0, "initial exploration noise");
    cmd->add_option("--a-max", cfg.search.a_max, "per-layer sparsity ceiling");
    cmd->add_option("--calib-samples", cfg.search.calibration_samples,
                    "calibration sample count");
    cmd->add_option("--train-size", cfg.train_size, "training subset size");
    cmd->add_option("--test-size", cfg.test_size, "test subset size");
    cmd->add_option("--mini-val", cfg.mini_val_size, "mini validation split size");
    cmd->add_option("--report-samples", cfg.report_samples, "entropy-report sample count");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"enprune: entropy-guided structured pruning for chain CNNs"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::string reward;
    bool no_augment = false;

    const char* commands[] = {"train",   "search", "prune",         "finetune",
                              "scratch", "eval",   "entropy-report"};
    const char* descriptions[] = {
        "train a baseline preset on the train split",
        "RL search for per-layer sparsity under the FLOPS target",
        "apply a saved plan (prune + least-squares reconstruction)",
        "fine-tune a pruned checkpoint",
        "train a plan's architecture from scratch",
        "report test accuracy of a checkpoint",
        "per-layer activation-entropy table for a checkpoint"};
    for (size_t i = 0; i < std::size(commands); ++i) {
        CLI::App* sub = app.add_subcommand(commands[i], descriptions[i]);
        add_common_options(sub, cfg, config_path, reward, no_augment);
        sub->callback([&cfg, name = std::string(commands[i])] { cfg.command = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) {
            // flags win: apply the file first, then re-parse the flags on top
            RunConfig file_cfg;
            enprune::apply_config(file_cfg, enprune::parse_config_file(config_path));
            file_cfg.command = cfg.command;
            std::swap(cfg, file_cfg);
            std::string ignored_config;
            CLI::App reparse{"reparse"};
            reparse.require_subcommand(1);
            for (size_t i = 0; i < std::size(commands); ++i) {
                CLI::App* sub = reparse.add_subcommand(commands[i], "");
                add_common_options(sub, cfg, ignored_config, reward, no_augment);
            }
            reparse.parse(argc, argv);
        }
        if (!reward.empty()) cfg.search.reward = enprune::reward_kind_from_name(reward);
        if (no_augment) cfg.train.augment = false;
        const enprune::CommandResult res = enprune::run_command(cfg);
        return res.exit_code;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
