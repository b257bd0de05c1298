#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "enprune/pruner.hpp"
#include "enprune/trainer.hpp"
#include "support/oracles.hpp"
#include "synthetic_cifar.hpp"

using namespace enprune;

namespace {

Tensor filters_with_values(const std::vector<float>& vals) {
    Tensor w({static_cast<int64_t>(vals.size()), 1, 1, 1});
    w.data = vals;
    return w;
}

Tensor random_batch(int64_t n, int64_t c, int64_t h, int64_t w, Rng& rng) {
    Tensor t({n, c, h, w});
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

}  // namespace

TEST_CASE("rank_filters_l2 ordering") {
    SUBCASE("spec example") {
        const Tensor w = filters_with_values({3.0f, 1.0f, 2.0f, 0.5f});
        CHECK(rank_filters_l2(w) == std::vector<int64_t>{3, 1, 2, 0});
    }
    SUBCASE("ties break toward the lower index") {
        const Tensor w = filters_with_values({1.0f, 1.0f, 1.0f, 1.0f});
        CHECK(rank_filters_l2(w) == std::vector<int64_t>{0, 1, 2, 3});
    }
    SUBCASE("random weights agree with an independent sort") {
        Rng rng(3);
        Tensor w({6, 2, 3, 3});
        for (auto& v : w.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        std::vector<std::pair<double, int64_t>> norms;
        for (int64_t f = 0; f < 6; ++f) {
            double s = 0.0;
            for (int64_t i = 0; i < 18; ++i) {
                const double v = w.data[static_cast<size_t>(f * 18 + i)];
                s += v * v;
            }
            norms.emplace_back(std::sqrt(s), f);
        }
        std::sort(norms.begin(), norms.end());
        std::vector<int64_t> want;
        for (const auto& [n, f] : norms) want.push_back(f);
        CHECK(rank_filters_l2(w) == want);
    }
}

TEST_CASE("select_kept counts") {
    CHECK(select_kept(4, 0.5) == 2);
    CHECK(select_kept(4, 0.0) == 4);
    CHECK(select_kept(4, 0.9) == 1);
    SUBCASE("equals ceil((1-a)n) clamped to >= 1 across a grid of ratios") {
        for (int64_t n : {1, 2, 3, 7, 16, 33, 128}) {
            for (int ai = 0; ai < 100; ++ai) {
                const double a = ai / 100.0;
                const int64_t want =
                    std::max<int64_t>(1, static_cast<int64_t>(std::ceil((1.0 - a) * n - 1e-9)));
                CHECK(select_kept(n, a) == want);
            }
        }
    }
    SUBCASE("rejects out-of-range sparsity") {
        CHECK_THROWS_AS(select_kept(4, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(select_kept(4, -0.1), std::invalid_argument);
    }
}

TEST_CASE("plan files round-trip") {
    SparsityPlan plan;
    plan.entries = {{0, 0.25}, {2, 0.5}, {5, 0.832031}};
    const std::string path = "/tmp/enprune_test_plan.tsv";
    save_plan(plan, path);
    const SparsityPlan back = load_plan(path);
    REQUIRE(back.entries.size() == plan.entries.size());
    for (size_t i = 0; i < plan.entries.size(); ++i) {
        CHECK(back.entries[i].first == plan.entries[i].first);
        CHECK(back.entries[i].second == plan.entries[i].second);
    }
    std::remove(path.c_str());
}

TEST_CASE("calibration cache construction") {
    Rng init(7);
    const ModelGraph g =
        build_chain({{LayerKind::Conv, 4},
                     {LayerKind::Relu, 0},
                     {LayerKind::Conv, 6},
                     {LayerKind::Relu, 0},
                     {LayerKind::Flatten, 0},
                     {LayerKind::Linear, 5}},
                    2, 6, 6, 17);

    SUBCASE("one sample, one position per layer") {
        Rng rng(9);
        Rng pos_rng(100);
        const Tensor batch = random_batch(1, 2, 6, 6, rng);
        const CalibrationCache cache = build_calibration_cache(g, batch, 1, pos_rng);
        REQUIRE(cache.entries.size() == 3);  // two convs + classifier linear
        CHECK(cache.entries[0].patches.rows == 1);
        CHECK(cache.entries[0].patches.cols == 2 * 9);
        CHECK(cache.entries[1].patches.rows == 1);
        CHECK(cache.entries[2].kind == LayerKind::Linear);
        CHECK(cache.entries[2].patches.rows == 1);
        CHECK(cache.entries[2].patches.cols == 6 * 6 * 6 / (6 * 6) * 36);
    }
    SUBCASE("cached output rows match the conv oracle at the cached position") {
        Rng rng(11);
        Rng pos_rng(101);
        const Tensor batch = random_batch(3, 2, 6, 6, rng);
        const CalibrationCache cache = build_calibration_cache(g, batch, 4, pos_rng);
        const CalibrationEntry& e0 = cache.entries[0];
        const Tensor ref = oracle::naive_conv2d(batch, g.weights[0], g.biases[0], 1, 1);
        const int64_t grid = 6 * 6;
        for (int64_t r = 0; r < e0.outputs.rows; ++r) {
            const int64_t s = e0.patches.provenance.sample_ids[static_cast<size_t>(r)];
            const int64_t p = e0.patches.provenance.positions[static_cast<size_t>(r)];
            for (int64_t oc = 0; oc < 4; ++oc)
                CHECK(std::fabs(e0.outputs.at(r, oc) -
                                ref.data[static_cast<size_t>((s * 4 + oc) * grid + p)]) < 1e-6);
        }
    }
    SUBCASE("identical seeds choose identical positions") {
        Rng rng(13);
        const Tensor batch = random_batch(2, 2, 6, 6, rng);
        Rng a(55), b(55);
        const CalibrationCache ca = build_calibration_cache(g, batch, 3, a);
        const CalibrationCache cb = build_calibration_cache(g, batch, 3, b);
        CHECK(ca.entries[0].patches.provenance.positions ==
              cb.entries[0].patches.provenance.positions);
        CHECK(ca.entries[1].patches.data == cb.entries[1].patches.data);
    }
}

TEST_CASE("reconstruct_layer behavior") {
    Rng init(19);
    const ModelGraph g = build_chain({{LayerKind::Conv, 4},
                                      {LayerKind::Relu, 0},
                                      {LayerKind::Conv, 6}},
                                     2, 8, 8, 23);
    Rng rng(21);
    Rng pos_rng(102);
    const Tensor batch = random_batch(8, 2, 8, 8, rng);
    const CalibrationCache cache = build_calibration_cache(g, batch, 12, pos_rng);
    const CalibrationEntry& succ = cache.entries[1];  // conv 4 -> 6
    const std::vector<int64_t> all_in{0, 1, 2, 3};
    const std::vector<int64_t> all_out{0, 1, 2, 3, 4, 5};

    SUBCASE("nothing removed, ridge 0: outputs reproduced") {
        const ReconstructedLayer rec = reconstruct_layer(succ, all_in, all_out, 0.0);
        const double res = calibration_residual(succ, all_in, all_out, rec.weight, rec.bias);
        CHECK(res / static_cast<double>(succ.outputs.rows * succ.outputs.cols) < 1e-8);
    }
    SUBCASE("reconstruction beats truncation on random prune cases") {
        Rng trial_rng(31);
        for (int trial = 0; trial < 8; ++trial) {
            // a prune case always drops at least one channel
            const int64_t dropped = 1 + trial_rng.uniform_int(3);
            std::vector<int64_t> kept_in;
            for (int64_t c = 0; c < 4 - dropped; ++c) kept_in.push_back(c);
            const ReconstructedLayer rec = reconstruct_layer(succ, kept_in, all_out, 1e-4);
            // truncated candidate: original successor weights restricted to kept_in
            Tensor trunc_w({6, static_cast<int64_t>(kept_in.size()) * 9});
            const Tensor& ow = g.weights[2];
            for (int64_t o = 0; o < 6; ++o)
                for (size_t c = 0; c < kept_in.size(); ++c)
                    std::copy_n(ow.data.begin() + (o * 4 + kept_in[c]) * 9, 9,
                                trunc_w.data.begin() + (o * static_cast<int64_t>(kept_in.size()) +
                                                        static_cast<int64_t>(c)) *
                                                           9);
            const double r_rec =
                calibration_residual(succ, kept_in, all_out, rec.weight, rec.bias);
            const double r_trunc =
                calibration_residual(succ, kept_in, all_out, trunc_w, g.biases[2]);
            CHECK(r_rec <= r_trunc + 1e-9);
        }
    }
    SUBCASE("dropping an all-zero input channel reduces to truncation") {
        // zero out conv0's filter 1 so channel 1 of the successor input is always zero
        ModelGraph gz = g;
        std::fill(gz.weights[0].data.begin() + 1 * 18, gz.weights[0].data.begin() + 2 * 18, 0.0f);
        gz.biases[0](1) = 0.0f;
        Rng pos2(103);
        const CalibrationCache cz = build_calibration_cache(gz, batch, 12, pos2);
        const std::vector<int64_t> kept_in{0, 2, 3};
        const ReconstructedLayer rec = reconstruct_layer(cz.entries[1], kept_in, all_out, 0.0);
        const Tensor& ow = gz.weights[2];
        for (int64_t o = 0; o < 6; ++o)
            for (size_t c = 0; c < kept_in.size(); ++c)
                for (int64_t k = 0; k < 9; ++k) {
                    const float want = ow.data[static_cast<size_t>((o * 4 + kept_in[c]) * 9 + k)];
                    const float got =
                        rec.weight.data[static_cast<size_t>((o * 3 + static_cast<int64_t>(c)) * 9 +
                                                            k)];
                    CHECK(std::fabs(want - got) < 1e-6);
                }
    }
    SUBCASE("empty kept sets are rejected") {
        CHECK_THROWS_AS(reconstruct_layer(succ, {}, all_out, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(reconstruct_layer(succ, all_in, {}, 0.0), std::invalid_argument);
    }
    SUBCASE("underdetermined systems are flagged, not rejected") {
        Rng pos3(104);
        const Tensor tiny = random_batch(1, 2, 8, 8, rng);
        const CalibrationCache small = build_calibration_cache(g, tiny, 2, pos3);
        const ReconstructedLayer rec = reconstruct_layer(small.entries[1], all_in, all_out, 1e-4);
        CHECK(rec.underdetermined);
    }
}

TEST_CASE("prune_network end to end") {
    const ModelGraph g = build_preset("tinyvgg6", 3, 32, 32, 41);
    Rng rng(43);
    Rng pos_rng(105);
    const Tensor batch = random_batch(24, 3, 32, 32, rng);
    const CalibrationCache cache = build_calibration_cache(g, batch, 10, pos_rng);
    const auto prunable = g.prunable_layers();

    auto plan_with = [&](double a) {
        SparsityPlan plan;
        for (int64_t t : prunable) plan.entries.emplace_back(t, a);
        return plan;
    };

    SUBCASE("the all-zero plan is functionally identity") {
        const ModelGraph pruned = prune_network(g, plan_with(0.0), cache, 1e-4);
        const Tensor probe = random_batch(4, 3, 32, 32, rng);
        const Tensor a = g.forward(probe);
        const Tensor b = pruned.forward(probe);
        double worst = 0.0;
        for (size_t i = 0; i < a.data.size(); ++i)
            worst = std::max(worst, std::fabs(static_cast<double>(a.data[i]) -
                                              static_cast<double>(b.data[i])));
        CHECK(worst <= 1e-4);
    }
    SUBCASE("a = 0.5 everywhere gives roughly quarter FLOPS") {
        const ModelGraph pruned = prune_network(g, plan_with(0.5), cache, 1e-4);
        const double ratio = preserved_ratio(pruned, g);
        CHECK(ratio > 0.20);
        CHECK(ratio < 0.30);
        CHECK(pruned.forward(random_batch(2, 3, 32, 32, rng)).all_finite());
    }
    SUBCASE("pruning is deterministic") {
        const ModelGraph a = prune_network(g, plan_with(0.4), cache, 1e-4);
        const ModelGraph b = prune_network(g, plan_with(0.4), cache, 1e-4);
        CHECK(graphs_equal(a, b));
    }
    SUBCASE("plan shape errors are rejected") {
        SparsityPlan bad;
        bad.entries = {{0, 0.5}};
        CHECK_THROWS_AS(prune_network(g, bad, cache, 1e-4), std::invalid_argument);
    }
}

TEST_CASE("reconstruction preserves accuracy better than plain truncation") {
    // small trained network, 20 random plans, paired evaluation on a fixed
    // test batch
    const std::string train_path = "/tmp/enprune_pruner_train.bin";
    const std::string test_path = "/tmp/enprune_pruner_test.bin";
    synth::write_batch_file(train_path, 1100, 311);
    synth::write_batch_file(test_path, 330, 312);
    Dataset train_pool = load_cifar10({train_path});
    Dataset test_pool = load_cifar10({test_path});
    const ChannelStats stats = compute_channel_stats(train_pool);
    standardize(train_pool, stats);
    standardize(test_pool, stats);
    SplitSizes sizes;
    sizes.train = 1024;
    sizes.test = 320;
    sizes.mini_val = 0;
    sizes.calibration = 64;
    const SplitDataset data = subset(train_pool, test_pool, sizes, 313);
    std::remove(train_path.c_str());
    std::remove(test_path.c_str());

    const ModelGraph net = build_chain({{LayerKind::Conv, 8},
                                        {LayerKind::Relu, 0},
                                        {LayerKind::MaxPool, 0},
                                        {LayerKind::Conv, 12},
                                        {LayerKind::Relu, 0},
                                        {LayerKind::MaxPool, 0},
                                        {LayerKind::Flatten, 0},
                                        {LayerKind::Linear, 10}},
                                       3, 32, 32, 314);
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.seed = 315;
    const TrainResult tr = train(net, data.train, data.test, tcfg);
    REQUIRE(evaluate(tr.graph, data.test) > 0.3);

    Rng pos_rng(316);
    const CalibrationCache cache =
        build_calibration_cache(tr.graph, data.calibration.images, 8, pos_rng);
    const auto prunable = tr.graph.prunable_layers();

    auto truncate_only = [&](const SparsityPlan& plan) {
        ModelGraph cur = tr.graph;
        for (size_t i = 0; i < prunable.size(); ++i) {
            const int64_t t = prunable[i];
            const int64_t n = cur.weights[static_cast<size_t>(t)].dim(0);
            const auto kept =
                kept_filter_indices(cur.weights[static_cast<size_t>(t)], plan.entries[i].second);
            if (static_cast<int64_t>(kept.size()) < n)
                cur = remove_output_channels(cur, t, kept);
        }
        return cur;
    };

    Rng rng(317);
    int wins = 0;
    for (int trial = 0; trial < 20; ++trial) {
        SparsityPlan plan;
        for (int64_t t : prunable) plan.entries.emplace_back(t, rng.uniform(0.2, 0.6));
        const double acc_rec = evaluate(prune_network(tr.graph, plan, cache, 1e-4), data.test);
        const double acc_trunc = evaluate(truncate_only(plan), data.test);
        if (acc_rec >= acc_trunc) ++wins;
    }
    CHECK(wins >= 16);  // at least 80% of paired trials
}
