#include "enprune/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "enprune/trainer.hpp"

namespace enprune {

std::string reward_kind_name(RewardKind k) {
    switch (k) {
        case RewardKind::Entropy: return "entropy";
        case RewardKind::Accuracy: return "accuracy";
        case RewardKind::Random: return "random";
    }
    throw std::invalid_argument("reward_kind_name: unknown kind");
}

RewardKind reward_kind_from_name(const std::string& s) {
    if (s == "entropy") return RewardKind::Entropy;
    if (s == "accuracy") return RewardKind::Accuracy;
    if (s == "random") return RewardKind::Random;
    throw std::invalid_argument("unknown reward kind '" + s + "' (entropy|accuracy|random)");
}

void SearchConfig::validate() const {
    if (flops_target <= 0.0 || flops_target >= 1.0)
        throw std::invalid_argument("search: flops_target must be in (0,1)");
    if (episodes < 1) throw std::invalid_argument("search: episodes must be >= 1");
    if (a_max <= 0.0 || a_max >= 1.0)
        throw std::invalid_argument("search: a_max must be in (0,1)");
    if (bins < 2) throw std::invalid_argument("search: bins must be >= 2");
    if (calibration_samples < 1) throw std::invalid_argument("search: empty calibration batch");
}

FlopsBudget::FlopsBudget(const ModelGraph& original) {
    prunable_ = original.prunable_layers();
    if (prunable_.empty()) throw std::invalid_argument("FlopsBudget: no prunable layers");
    original_total_ = total_flops(original);

    int64_t accounted = 0;
    for (size_t j = 0; j < prunable_.size(); ++j) {
        const LayerSpec& s = original.layers[static_cast<size_t>(prunable_[j])];
        specs_.push_back(s);
        filters_.push_back(s.c_out);
        units_.push_back(2 * s.kh * s.kw * s.out_h * s.out_w);
        in_fixed_.push_back(j == 0 ? s.c_in : 0);
        accounted += count_flops(s);
    }
    // classifier term driven by the last conv's kept count
    const int64_t succ = original.next_parameterized(prunable_.back());
    if (succ >= 0 && original.layers[static_cast<size_t>(succ)].kind == LayerKind::Linear) {
        const LayerSpec& lin = original.layers[static_cast<size_t>(succ)];
        const int64_t block = lin.c_in / specs_.back().c_out;
        linear_unit_ = 2 * lin.c_out * block;
        accounted += count_flops(lin);
    }
    const_flops_ = original_total_ - accounted;

    spans_.c_in_min = spans_.c_in_max = specs_[0].c_in;
    spans_.c_out_min = spans_.c_out_max = specs_[0].c_out;
    spans_.kernel_min = spans_.kernel_max = specs_[0].kh;
    spans_.stride_min = spans_.stride_max = specs_[0].stride;
    spans_.spatial_min = spans_.spatial_max = specs_[0].out_h * specs_[0].out_w;
    spans_.flops_max = 0;
    for (const auto& s : specs_) {
        spans_.c_in_min = std::min(spans_.c_in_min, s.c_in);
        spans_.c_in_max = std::max(spans_.c_in_max, s.c_in);
        spans_.c_out_min = std::min(spans_.c_out_min, s.c_out);
        spans_.c_out_max = std::max(spans_.c_out_max, s.c_out);
        spans_.kernel_min = std::min(spans_.kernel_min, s.kh);
        spans_.kernel_max = std::max(spans_.kernel_max, s.kh);
        spans_.stride_min = std::min(spans_.stride_min, s.stride);
        spans_.stride_max = std::max(spans_.stride_max, s.stride);
        spans_.spatial_min = std::min(spans_.spatial_min, s.out_h * s.out_w);
        spans_.spatial_max = std::max(spans_.spatial_max, s.out_h * s.out_w);
        spans_.flops_max = std::max(spans_.flops_max, count_flops(s));
    }
}

const LayerSpec& FlopsBudget::spec(int64_t j) const { return specs_.at(static_cast<size_t>(j)); }

int64_t FlopsBudget::total_with(const std::vector<int64_t>& kept) const {
    const int64_t p = layer_count();
    int64_t total = const_flops_;
    int64_t prev = 0;
    for (int64_t j = 0; j < p; ++j) {
        const int64_t own =
            j < static_cast<int64_t>(kept.size()) ? kept[static_cast<size_t>(j)] : filters_[static_cast<size_t>(j)];
        const int64_t in = j == 0 ? in_fixed_[0] : prev;
        total += units_[static_cast<size_t>(j)] * in * own;
        prev = own;
    }
    total += linear_unit_ * prev;
    return total;
}

int64_t FlopsBudget::layer_flops(int64_t j, const std::vector<int64_t>& kept_so_far) const {
    const int64_t in = j == 0 ? in_fixed_[0]
                              : (j - 1 < static_cast<int64_t>(kept_so_far.size())
                                     ? kept_so_far[static_cast<size_t>(j - 1)]
                                     : filters_[static_cast<size_t>(j - 1)]);
    return units_[static_cast<size_t>(j)] * in * filters_[static_cast<size_t>(j)];
}

namespace {

float minmax_norm(int64_t v, int64_t lo, int64_t hi) {
    if (hi == lo) return 0.0f;
    const double t = static_cast<double>(v - lo) / static_cast<double>(hi - lo);
    return static_cast<float>(std::clamp(t, 0.0, 1.0));
}

}  // namespace

std::vector<float> layer_state(const FlopsBudget& budget, int64_t step,
                               const std::vector<int64_t>& kept_so_far, double prev_action) {
    const int64_t p = budget.layer_count();
    if (step < 0 || step >= p)
        throw std::invalid_argument("layer_state: step " + std::to_string(step) +
                                    " is not a prunable layer index");
    const auto& spans = budget.spans();
    const LayerSpec& s = budget.spec(step);
    const double f_orig = static_cast<double>(budget.original_total());

    const int64_t c_in_cur =
        step == 0 ? s.c_in : kept_so_far[static_cast<size_t>(step - 1)];
    const int64_t reduced = budget.original_total() - budget.total_with(kept_so_far);

    // max reducible in layers > step: everything later at a_max = 1 filter is
    // not meaningful; "reducible" spans from untouched down to one filter per
    // later layer given the chain so far.
    std::vector<int64_t> untouched = kept_so_far;
    untouched.resize(static_cast<size_t>(step + 1), 0);
    untouched[static_cast<size_t>(step)] = s.c_out;
    std::vector<int64_t> floor_later = untouched;
    floor_later.resize(static_cast<size_t>(p), 0);
    for (int64_t j = step + 1; j < p; ++j) floor_later[static_cast<size_t>(j)] = 1;
    const int64_t reducible_later =
        budget.total_with(untouched) - budget.total_with(floor_later);

    std::vector<float> f(11);
    f[0] = p > 1 ? static_cast<float>(step) / static_cast<float>(p - 1) : 0.0f;
    f[1] = minmax_norm(c_in_cur, spans.c_in_min, spans.c_in_max);
    f[2] = minmax_norm(s.c_out, spans.c_out_min, spans.c_out_max);
    f[3] = minmax_norm(s.kh, spans.kernel_min, spans.kernel_max);
    f[4] = minmax_norm(s.stride, spans.stride_min, spans.stride_max);
    f[5] = minmax_norm(s.out_h * s.out_w, spans.spatial_min, spans.spatial_max);
    f[6] = static_cast<float>(
        std::clamp(static_cast<double>(budget.layer_flops(step, kept_so_far)) /
                       static_cast<double>(spans.flops_max),
                   0.0, 1.0));
    f[7] = static_cast<float>(std::clamp(static_cast<double>(reduced) / f_orig, 0.0, 1.0));
    f[8] = static_cast<float>(std::clamp(static_cast<double>(reducible_later) / f_orig, 0.0, 1.0));
    f[9] = 1.0f;  // total original FLOPS, normalized against itself
    f[10] = static_cast<float>(std::clamp(prev_action, 0.0, 1.0));
    return f;
}

ClipResult clip_action(double a, const FlopsBudget& budget, int64_t step,
                       const std::vector<int64_t>& kept_so_far, double beta, double a_max) {
    const int64_t p = budget.layer_count();
    if (step < 0 || step >= p) throw std::invalid_argument("clip_action: bad step");
    const double budget_flops = beta * static_cast<double>(budget.original_total());

    // candidate totals with layer `step` keeping k and all later layers at
    // their a_max floor
    std::vector<int64_t> kept = kept_so_far;
    kept.resize(static_cast<size_t>(p), 0);
    for (int64_t j = step + 1; j < p; ++j)
        kept[static_cast<size_t>(j)] = select_kept(budget.filters(j), a_max);

    const int64_t n = budget.filters(step);
    const int64_t k_floor = select_kept(n, a_max);
    kept[static_cast<size_t>(step)] = k_floor;
    if (static_cast<double>(budget.total_with(kept)) > budget_flops)
        throw EpisodeInfeasible(
            "FLOPS budget infeasible at layer step " + std::to_string(step) + ": even a_max=" +
            std::to_string(a_max) + " everywhere cannot reach the target of " +
            std::to_string(beta));

    int64_t k_star = k_floor;
    for (int64_t k = k_floor + 1; k <= n; ++k) {
        kept[static_cast<size_t>(step)] = k;
        if (static_cast<double>(budget.total_with(kept)) > budget_flops) break;
        k_star = k;
    }

    ClipResult res;
    res.a_min = std::max(0.0, 1.0 - static_cast<double>(k_star) / static_cast<double>(n));
    res.action = std::clamp(a, res.a_min, a_max);
    res.clipped = res.action != a;
    return res;
}

PruningEnv::PruningEnv(const ModelGraph& baseline, const SplitDataset& data,
                       const SearchConfig& cfg)
    : baseline_(baseline), cfg_(cfg), budget_(baseline) {
    cfg_.validate();
    if (data.calibration.empty())
        throw std::invalid_argument("PruningEnv: calibration split is empty");
    if (cfg_.reward == RewardKind::Accuracy && data.mini_val.empty())
        throw std::invalid_argument("PruningEnv: accuracy reward needs a mini-val split");
    calibration_batch_ = data.calibration.images;
    mini_val_ = data.mini_val;
    Rng cache_rng(cfg_.seed ^ 0xc2b2ae3d27d4eb4full);
    cache_ = build_calibration_cache(baseline, calibration_batch_, cfg_.calibration_positions,
                                     cache_rng);
}

double PruningEnv::compute_reward(const ModelGraph& pruned, Rng& reward_rng) const {
    switch (cfg_.reward) {
        case RewardKind::Entropy: {
            EntropyConfig ec;
            ec.bins = cfg_.bins;
            const double r = network_entropy_reward(pruned, calibration_batch_, ec);
            return cfg_.entropy_maximize ? 1.0 - r : r;
        }
        case RewardKind::Accuracy: return evaluate(pruned, mini_val_);
        case RewardKind::Random: return reward_rng.uniform();
    }
    throw std::invalid_argument("compute_reward: unknown reward kind");
}

ModelGraph PruningEnv::prune_with(const SparsityPlan& plan) const {
    return prune_network(baseline_, plan, cache_, cfg_.ridge);
}

EpisodeResult PruningEnv::run_episode(DdpgAgent& agent, bool explore_random, double sigma,
                                      Rng& explore_rng, Rng& reward_rng) {
    const int64_t p = budget_.layer_count();
    std::vector<std::vector<float>> states;
    std::vector<int64_t> kept;
    EpisodeResult res;
    double prev_action = 0.0;

    for (int64_t j = 0; j < p; ++j) {
        std::vector<float> s = layer_state(budget_, j, kept, prev_action);
        const double a_raw = explore_random ? explore_rng.uniform() : agent.act(s, sigma);
        const ClipResult clip = clip_action(a_raw, budget_, j, kept, cfg_.flops_target,
                                            cfg_.a_max);
        // quantize upward at 6 decimals so saved plans reproduce the episode
        const double a = std::min(std::ceil(clip.action * 1e6) / 1e6, cfg_.a_max);
        kept.push_back(select_kept(budget_.filters(j), a));
        res.plan.entries.emplace_back(budget_.prunable_indices()[static_cast<size_t>(j)], a);
        res.clipped.push_back(clip.clipped);
        states.push_back(std::move(s));
        prev_action = a;
    }

    const ModelGraph pruned = prune_with(res.plan);
    res.reward = compute_reward(pruned, reward_rng);
    res.preserved_ratio = preserved_ratio(pruned, baseline_);

    for (int64_t j = 0; j < p; ++j) {
        Transition t;
        t.state = states[static_cast<size_t>(j)];
        t.action = static_cast<float>(res.plan.entries[static_cast<size_t>(j)].second);
        t.terminal = j == p - 1;
        t.reward = t.terminal ? static_cast<float>(res.reward) : 0.0f;
        t.next_state = t.terminal ? std::vector<float>(11, 0.0f)
                                  : states[static_cast<size_t>(j + 1)];
        agent.remember(std::move(t));
    }
    return res;
}

SearchResult search(const SearchConfig& cfg, const ModelGraph& baseline, const SplitDataset& data,
                    std::ostream* episode_log, DdpgAgent* out_agent) {
    cfg.validate();
    PruningEnv env(baseline, data, cfg);

    Rng master(cfg.seed);
    Rng explore_rng = master.fork();
    Rng reward_rng = master.fork();
    DdpgAgent::Config acfg;
    acfg.state_dim = 11;
    acfg.hidden = 300;
    acfg.actor_lr = cfg.actor_lr;
    acfg.critic_lr = cfg.critic_lr;
    acfg.buffer_capacity = cfg.buffer_capacity;
    acfg.sigma0 = cfg.sigma0;
    acfg.seed = master.next_u64();
    DdpgAgent agent(acfg);

    const int64_t updates_per_episode = env.budget().layer_count();
    if (episode_log) *episode_log << "episode,reward,preserved_ratio,sigma,plan\n";

    SearchResult result;
    double baseline_ema = 0.0;
    bool baseline_set = false;
    char buf[64];

    for (int64_t ep = 0; ep < cfg.episodes; ++ep) {
        const bool warmup = ep < cfg.warmup_episodes;
        const EpisodeResult er =
            env.run_episode(agent, warmup, agent.sigma(), explore_rng, reward_rng);

        baseline_ema = baseline_set
                           ? cfg.baseline_decay * baseline_ema + (1.0 - cfg.baseline_decay) * er.reward
                           : er.reward;
        baseline_set = true;

        if (!warmup)
            for (int64_t u = 0; u < updates_per_episode; ++u)
                agent.update(cfg.agent_batch, 1.0, cfg.tau, baseline_ema);

        if (episode_log) {
            std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,", static_cast<long long>(ep),
                          er.reward, er.preserved_ratio, agent.sigma());
            *episode_log << buf;
            for (size_t i = 0; i < er.plan.entries.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%s%.4f", i ? ";" : "",
                              er.plan.entries[i].second);
                *episode_log << buf;
            }
            *episode_log << "\n";
        }

        if (result.best_episode < 0 || er.reward > result.best.reward) {
            result.best = er;
            result.best_episode = ep;
        }
        ++result.episodes_run;
        agent.decay_noise(cfg.noise_decay);
    }

    result.best_pruned = env.prune_with(result.best.plan);
    if (out_agent) out_agent->load_state_entries(agent.state_entries());
    return result;
}

}  // namespace enprune
