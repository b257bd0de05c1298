// Bin robustness: entropy rewards computed at B = 128 and B = 256 must rank
// 20 random feasible plans almost identically (Spearman >= 0.8).

#include <algorithm>
#include <cmath>
#include <sstream>

#include "enprune/environment.hpp"
#include "enprune/trainer.hpp"
#include "harness.hpp"

using namespace enprune;
using acceptance::Checker;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<size_t> order(v.size());
    for (size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < order.size();) {
        size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

}  // namespace

int main() {
    Checker c;
    const std::string data_dir = acceptance::stage_data("bins", 3600, 600, 67);
    SplitSizes sizes;
    sizes.train = 3000;
    sizes.test = 500;
    sizes.mini_val = 0;
    sizes.calibration = 100;
    const SplitDataset data = acceptance::standardized_splits(data_dir, sizes, 21);

    // a briefly trained network so activations carry real structure
    TrainConfig tcfg;
    tcfg.epochs = 4;
    tcfg.seed = 21;
    const TrainResult tr =
        train(build_preset("tinyvgg6", 3, 32, 32, 21), data.train, data.test, tcfg);
    const ModelGraph& net = tr.graph;

    SearchConfig scfg;
    scfg.flops_target = 0.1;
    scfg.calibration_samples = 100;
    scfg.calibration_positions = 10;
    scfg.seed = 31;
    PruningEnv env(net, data, scfg);
    const FlopsBudget& budget = env.budget();

    // 20 random feasible plans via the same clipping the search applies
    Rng rng(97);
    std::vector<double> reward_lo, reward_hi;
    EntropyConfig b128, b256;
    b128.bins = 128;
    b256.bins = 256;
    for (int trial = 0; trial < 20; ++trial) {
        SparsityPlan plan;
        std::vector<int64_t> kept;
        for (int64_t j = 0; j < budget.layer_count(); ++j) {
            const ClipResult clip =
                clip_action(rng.uniform(), budget, j, kept, scfg.flops_target, scfg.a_max);
            kept.push_back(select_kept(budget.filters(j), clip.action));
            plan.entries.emplace_back(budget.prunable_indices()[static_cast<size_t>(j)],
                                      clip.action);
        }
        const ModelGraph pruned = env.prune_with(plan);
        reward_lo.push_back(network_entropy_reward(pruned, data.calibration.images, b128));
        reward_hi.push_back(network_entropy_reward(pruned, data.calibration.images, b256));
    }

    const double rho = spearman(reward_lo, reward_hi);
    std::ostringstream os;
    os << "Spearman(B=128, B=256) = " << rho << " over 20 plans (need >= 0.8)";
    c.check(rho >= 0.8, "bin-robustness", os.str());
    return c.finish("acceptance_bins");
}
