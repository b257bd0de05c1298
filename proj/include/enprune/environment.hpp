#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "enprune/agent.hpp"
#include "enprune/dataset.hpp"
#include "enprune/entropy.hpp"
#include "enprune/model_graph.hpp"
#include "enprune/pruner.hpp"

namespace enprune {

enum class RewardKind { Entropy, Accuracy, Random };
std::string reward_kind_name(RewardKind k);
RewardKind reward_kind_from_name(const std::string& s);

struct SearchConfig {
    double flops_target = 0.5;  // beta, fraction of FLOPS preserved
    RewardKind reward = RewardKind::Entropy;
    bool entropy_maximize = false;  // negative-control flag (reward = mean entropy)
    int64_t episodes = 200;
    double a_max = 0.8;
    int64_t bins = 256;
    int64_t calibration_samples = 100;
    int64_t calibration_positions = 10;
    uint64_t seed = 1;
    int64_t warmup_episodes = 25;
    double sigma0 = 0.5;
    double noise_decay = 0.99;
    double ridge = 1e-4;
    int64_t agent_batch = 64;
    double tau = 0.01;
    double baseline_decay = 0.95;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    int64_t buffer_capacity = 2000;

    void validate() const;
};

// Exact FLOPS of the chain as a function of per-prunable-layer kept-filter
// counts; shares select_kept with the pruner so budget checks and applied
// plans can never disagree.
class FlopsBudget {
public:
    explicit FlopsBudget(const ModelGraph& original);

    int64_t layer_count() const { return static_cast<int64_t>(filters_.size()); }
    int64_t filters(int64_t j) const { return filters_[static_cast<size_t>(j)]; }
    int64_t original_total() const { return original_total_; }
    const std::vector<int64_t>& prunable_indices() const { return prunable_; }

    // Total FLOPS when prunable layer j keeps kept[j] filters. kept may be a
    // prefix; unspecified layers keep everything.
    int64_t total_with(const std::vector<int64_t>& kept) const;

    // Current FLOPS of prunable layer j (own filters intact) given upstream
    // kept counts.
    int64_t layer_flops(int64_t j, const std::vector<int64_t>& kept_so_far) const;

    // normalization spans of the static per-layer features
    struct FeatureSpans {
        int64_t c_in_min, c_in_max;
        int64_t c_out_min, c_out_max;
        int64_t kernel_min, kernel_max;
        int64_t stride_min, stride_max;
        int64_t spatial_min, spatial_max;
        int64_t flops_max;
    };
    const FeatureSpans& spans() const { return spans_; }
    const LayerSpec& spec(int64_t j) const;

private:
    std::vector<int64_t> prunable_;
    std::vector<int64_t> filters_;   // original filter counts per prunable layer
    std::vector<int64_t> units_;     // conv flops per (c_in * c_out) unit
    std::vector<int64_t> in_fixed_;  // c_in for j=0, 0 otherwise (chained)
    int64_t linear_unit_ = 0;        // classifier flops per input channel of the last conv
    int64_t const_flops_ = 0;
    int64_t original_total_ = 0;
    std::vector<LayerSpec> specs_;
    FeatureSpans spans_{};
};

class EpisodeInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The 11 environment features, each in [0,1]: layer index, current input
// channels, output channels, kernel, stride, output spatial size, this
// layer's FLOPS, FLOPS already reduced, maximum FLOPS still reducible later,
// total original FLOPS, previous action.
std::vector<float> layer_state(const FlopsBudget& budget, int64_t step,
                               const std::vector<int64_t>& kept_so_far, double prev_action);

struct ClipResult {
    double action = 0.0;
    double a_min = 0.0;
    bool clipped = false;
};

// Smallest sparsity at `step` that keeps the budget attainable assuming all
// later layers prune at a_max; throws EpisodeInfeasible when even that is not
// enough.
ClipResult clip_action(double a, const FlopsBudget& budget, int64_t step,
                       const std::vector<int64_t>& kept_so_far, double beta, double a_max);

struct EpisodeResult {
    SparsityPlan plan;
    double reward = 0.0;
    double preserved_ratio = 0.0;
    std::vector<bool> clipped;
};

// Layer-by-layer rollout against a fixed baseline graph and calibration
// cache: state -> act -> clip -> record, then prune + reconstruct + reward.
// All step transitions are pushed to the agent with the terminal reward on
// the last step and zero rewards before it.
class PruningEnv {
public:
    PruningEnv(const ModelGraph& baseline, const SplitDataset& data, const SearchConfig& cfg);

    EpisodeResult run_episode(DdpgAgent& agent, bool explore_random, double sigma,
                              Rng& explore_rng, Rng& reward_rng);

    double compute_reward(const ModelGraph& pruned, Rng& reward_rng) const;
    ModelGraph prune_with(const SparsityPlan& plan) const;

    const FlopsBudget& budget() const { return budget_; }
    const CalibrationCache& cache() const { return cache_; }

private:
    const ModelGraph& baseline_;
    SearchConfig cfg_;
    FlopsBudget budget_;
    CalibrationCache cache_;
    Tensor calibration_batch_;
    Dataset mini_val_;
};

struct SearchResult {
    EpisodeResult best;
    int64_t best_episode = -1;
    int64_t episodes_run = 0;
    ModelGraph best_pruned;
};

// Full search: warm-up, learning, noise decay, best-plan tracking. Episode
// rows stream to `episode_log` as
// "episode,reward,preserved_ratio,sigma,plan" with the plan semicolon-joined
// at 4 decimals. `out_agent`, when given, receives the trained agent state.
SearchResult search(const SearchConfig& cfg, const ModelGraph& baseline, const SplitDataset& data,
                    std::ostream* episode_log, DdpgAgent* out_agent = nullptr);

}  // namespace enprune
