#include "doctest.h"

#include <cmath>

#include "enprune/entropy.hpp"
#include "enprune/model_graph.hpp"
#include "enprune/rng.hpp"
#include "support/oracles.hpp"

using namespace enprune;

namespace {

std::vector<float> checkerboard(int64_t h, int64_t w, float a, float b) {
    std::vector<float> m(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) m[static_cast<size_t>(i * w + j)] = ((i + j) % 2) ? b : a;
    return m;
}

std::vector<float> random_map(int64_t h, int64_t w, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<float> m(static_cast<size_t>(h * w));
    for (auto& v : m) v = static_cast<float>(rng.uniform(lo, hi));
    return m;
}

std::vector<double> to_double(const std::vector<float>& m) {
    return std::vector<double>(m.begin(), m.end());
}

}  // namespace

TEST_CASE("quantize_channel statuses and bin assignment") {
    SUBCASE("all-zero map is excluded") {
        std::vector<float> zeros(16, 0.0f);
        CHECK(quantize_channel(zeros, 4, 4, 8).status == GridStatus::ExcludedAllZero);
    }
    SUBCASE("constant nonzero map is excluded") {
        std::vector<float> c(16, 3.5f);
        CHECK(quantize_channel(c, 4, 4, 8).status == GridStatus::ExcludedConstant);
    }
    SUBCASE("two-point range maps to bins 0 and B-1") {
        std::vector<float> m{0.0f, 1.0f, 1.0f, 0.0f};
        const QuantizedGrid g = quantize_channel(m, 2, 2, 2);
        CHECK(g.status == GridStatus::Valid);
        CHECK(g.cells == std::vector<int32_t>{0, 1, 1, 0});
    }
    SUBCASE("sixteen evenly spaced values with four bins") {
        std::vector<float> m(16);
        for (int i = 0; i < 16; ++i) m[static_cast<size_t>(i)] = static_cast<float>(i) / 15.0f;
        const QuantizedGrid g = quantize_channel(m, 4, 4, 4);
        const std::vector<int32_t> want{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3};
        CHECK(g.cells == want);
    }
    SUBCASE("degenerate extents are rejected") {
        std::vector<float> m{1.0f, 2.0f};
        CHECK_THROWS_AS(quantize_channel(m, 1, 2, 4), std::invalid_argument);
        CHECK_THROWS_AS(quantize_channel(m, 2, 1, 4), std::invalid_argument);
    }
}

TEST_CASE("univariate entropy of simple marginals") {
    SUBCASE("two equiprobable bins give one bit") {
        const QuantizedGrid g = quantize_channel(checkerboard(4, 4, 0.0f, 1.0f), 4, 4, 2);
        CHECK(univariate_entropy(g) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("four equiprobable bins give two bits") {
        std::vector<float> m(16);
        for (int i = 0; i < 16; ++i) m[static_cast<size_t>(i)] = static_cast<float>(i / 4);
        const QuantizedGrid g = quantize_channel(m, 4, 4, 4);
        CHECK(univariate_entropy(g) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("three-quarters/one-quarter split") {
        std::vector<float> m(16, 0.0f);
        for (int i = 0; i < 4; ++i) m[static_cast<size_t>(i)] = 1.0f;
        const QuantizedGrid g = quantize_channel(m, 4, 4, 2);
        CHECK(univariate_entropy(g) == doctest::Approx(0.811278).epsilon(1e-6));
    }
    SUBCASE("excluded grids are rejected") {
        std::vector<float> zeros(16, 0.0f);
        const QuantizedGrid g = quantize_channel(zeros, 4, 4, 2);
        CHECK_THROWS_AS(univariate_entropy(g), std::invalid_argument);
    }
}

TEST_CASE("joint distribution pair counting") {
    SUBCASE("2x2 column pattern, offset (0,1)") {
        std::vector<float> m{0.0f, 1.0f, 0.0f, 1.0f};
        const QuantizedGrid g = quantize_channel(m, 2, 2, 2);
        const JointHistogram h = joint_distribution(g, 0, 1);
        CHECK(h.pair_count == 2);
        CHECK(h.counts[0 * 2 + 1] == 2);  // all mass on (0,1)
        CHECK(h.counts[0] == 0);
        CHECK(h.counts[3] == 0);
    }
    SUBCASE("pair count is H*(W-1) for offset (0,1)") {
        Rng rng(5);
        const auto m = random_map(6, 9, rng);
        const QuantizedGrid g = quantize_channel(m, 6, 9, 4);
        CHECK(joint_distribution(g, 0, 1).pair_count == 6 * 8);
    }
    SUBCASE("checkerboard alternates, offset (1,0)") {
        const QuantizedGrid g = quantize_channel(checkerboard(4, 4, 0.0f, 1.0f), 4, 4, 2);
        const JointHistogram h = joint_distribution(g, 1, 0);
        CHECK(h.pair_count == 12);
        CHECK(h.counts[0 * 2 + 1] == 6);
        CHECK(h.counts[1 * 2 + 0] == 6);
    }
    SUBCASE("unknown offsets are rejected") {
        const QuantizedGrid g = quantize_channel(checkerboard(4, 4, 0.0f, 1.0f), 4, 4, 2);
        CHECK_THROWS_AS(joint_distribution(g, 2, 0), std::invalid_argument);
    }
}

TEST_CASE("bivariate entropy of small histograms") {
    JointHistogram h;
    h.bins = 2;
    h.counts = {4, 0, 0, 0};
    h.pair_count = 4;
    CHECK(bivariate_entropy(h) == doctest::Approx(0.0));
    h.counts = {2, 2, 0, 0};
    CHECK(bivariate_entropy(h) == doctest::Approx(1.0));
    h.counts = {1, 1, 1, 1};
    CHECK(bivariate_entropy(h) == doctest::Approx(2.0));
}

TEST_CASE("relative entropy formula and clamping") {
    CHECK(relative_entropy(1.0, 1.0) == doctest::Approx(0.0));
    CHECK(relative_entropy(2.0, 1.0) == doctest::Approx(1.0));
    CHECK(relative_entropy(1.5, 1.0) == doctest::Approx(0.5));
    CHECK(relative_entropy(0.9, 1.0) == 0.0);   // boundary effects clamp up
    CHECK(relative_entropy(2.5, 1.0) == 1.0);   // and down
    CHECK_THROWS_AS(relative_entropy(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("ame on the spec maps") {
    EntropyConfig cfg;
    SUBCASE("all-zero map is excluded") {
        std::vector<float> zeros(64, 0.0f);
        CHECK_FALSE(ame(zeros, 8, 8, cfg).valid());
    }
    SUBCASE("checkerboard has zero spatial disorder") {
        for (int64_t bins : {2, 16, 256}) {
            cfg.bins = bins;
            const AmeResult r = ame(checkerboard(8, 8, 0.25f, 0.75f), 8, 8, cfg);
            CHECK(r.valid());
            CHECK(std::fabs(r.value) <= 1e-12);
        }
    }
    SUBCASE("large IID-uniform map approaches independence") {
        Rng rng(99);
        cfg.bins = 16;
        const auto m = random_map(256, 256, rng);
        const AmeResult r = ame(m, 256, 256, cfg);
        CHECK(r.valid());
        CHECK(r.value >= 0.9);
    }
}

TEST_CASE("ame stays in [0,1] across bin counts on random maps") {
    Rng rng(123);
    EntropyConfig cfg;
    for (int64_t bins : {2, 16, 64, 256}) {
        cfg.bins = bins;
        for (int trial = 0; trial < 40; ++trial) {
            const int64_t h = 2 + rng.uniform_int(12);
            const int64_t w = 2 + rng.uniform_int(12);
            const auto m = random_map(h, w, rng, -2.0, 3.0);
            const AmeResult r = ame(m, h, w, cfg);
            if (!r.valid()) continue;
            CHECK(r.value >= 0.0);
            CHECK(r.value <= 1.0);
        }
    }
}

TEST_CASE("fast joint histogram equals the pair-enumeration oracle") {
    Rng rng(321);
    EntropyConfig cfg;
    cfg.bins = 16;
    for (int trial = 0; trial < 50; ++trial) {
        const auto m = random_map(8, 8, rng);
        const QuantizedGrid g = quantize_channel(m, 8, 8, cfg.bins);
        REQUIRE(g.status == GridStatus::Valid);
        const auto q = oracle::quantize_oracle(to_double(m), 8, 8, cfg.bins);
        REQUIRE_FALSE(q.all_zero);
        std::vector<int> cells(g.cells.begin(), g.cells.end());
        CHECK(cells == q.bins);
        for (const auto& [dk, dl] : kSecondOrderOffsets) {
            const JointHistogram h = joint_distribution(g, dk, dl);
            const auto want = oracle::joint_counts_oracle(q.bins, 8, 8, dk, dl);
            int64_t total_want = 0;
            for (const auto& [key, cnt] : want) {
                CHECK(h.counts[static_cast<size_t>(key.first * cfg.bins + key.second)] == cnt);
                total_want += cnt;
            }
            CHECK(h.pair_count == total_want);
        }
    }
}

TEST_CASE("ame matches the oracle within 1e-12 and is affine invariant") {
    Rng rng(654);
    EntropyConfig cfg;
    for (int64_t bins : {2, 16, 64}) {
        cfg.bins = bins;
        for (int trial = 0; trial < 10; ++trial) {
            const auto m = random_map(8, 8, rng);
            const AmeResult r = ame(m, 8, 8, cfg);
            double want = 0.0;
            REQUIRE(oracle::ame_oracle(to_double(m), 8, 8, bins, &want));
            REQUIRE(r.valid());
            CHECK(std::fabs(r.value - want) < 1e-9);

            auto scaled = m;
            for (auto& v : scaled) v = 2.5f * v + 1.25f;
            const AmeResult r2 = ame(scaled, 8, 8, cfg);
            CHECK(r2.value == r.value);
        }
    }
}

TEST_CASE("bin label permutation leaves entropies unchanged") {
    Rng rng(777);
    const auto m = random_map(8, 8, rng);
    QuantizedGrid g = quantize_channel(m, 8, 8, 8);
    const double h0 = univariate_entropy(g);
    const double h01 = bivariate_entropy(joint_distribution(g, 0, 1));
    // relabel bin b -> bins-1-b
    for (auto& cell : g.cells) cell = 7 - cell;
    CHECK(univariate_entropy(g) == doctest::Approx(h0).epsilon(1e-12));
    CHECK(bivariate_entropy(joint_distribution(g, 0, 1)) == doctest::Approx(h01).epsilon(1e-12));
}

TEST_CASE("sde matches the brute-force oracle and embeds the AME terms") {
    Rng rng(888);
    EntropyConfig cfg;
    cfg.bins = 8;
    SUBCASE("constant grid is excluded") {
        std::vector<float> c{2.0f, 2.0f, 2.0f, 2.0f};
        CHECK(sde(c, 2, 2, cfg).status == GridStatus::ExcludedConstant);
    }
    SUBCASE("checkerboard") {
        const auto m = checkerboard(6, 6, 0.0f, 1.0f);
        const SdeResult r = sde(m, 6, 6, cfg);
        double want = 0.0;
        REQUIRE(oracle::sde_oracle(to_double(m), 6, 6, cfg.bins, &want));
        CHECK(r.value == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("random maps, plus AME extraction") {
        for (int trial = 0; trial < 5; ++trial) {
            const auto m = random_map(8, 8, rng);
            const SdeResult r = sde(m, 8, 8, cfg);
            REQUIRE(r.valid());
            double want = 0.0;
            REQUIRE(oracle::sde_oracle(to_double(m), 8, 8, cfg.bins, &want));
            CHECK(std::fabs(r.value - want) < 1e-9);
            const AmeResult a = ame(m, 8, 8, cfg);
            const double mean_hr = (r.second_order_hr[0] + r.second_order_hr[1] +
                                    r.second_order_hr[2] + r.second_order_hr[3]) /
                                   4.0;
            CHECK(std::fabs(a.value - mean_hr) < 1e-12);
        }
    }
    SUBCASE("size bound enforced") {
        std::vector<float> big(65 * 64, 0.5f);
        big[0] = 0.0f;
        CHECK_THROWS_AS(sde(big, 65, 64, cfg), std::invalid_argument);
    }
}

TEST_CASE("layer entropy aggregates valid channels only") {
    EntropyConfig cfg;
    cfg.bins = 8;
    Rng rng(111);
    SUBCASE("all channels all-zero gives 0") {
        Tensor act({2, 3, 4, 4}, 0.0f);
        CHECK(layer_entropy(act, cfg) == 0.0);
    }
    SUBCASE("excluded channels do not dilute the mean") {
        Tensor act({1, 2, 4, 4}, 0.0f);
        const auto m = random_map(4, 4, rng);
        std::copy(m.begin(), m.end(), act.data.begin());  // channel 0 valid, channel 1 zero
        const AmeResult solo = ame(m, 4, 4, cfg);
        REQUIRE(solo.valid());
        CHECK(layer_entropy(act, cfg) == doctest::Approx(solo.value).epsilon(1e-12));
        const LayerEntropyStats stats = layer_entropy_stats(act, cfg);
        CHECK(stats.valid_channels == 1);
        CHECK(stats.excluded_channels == 1);
    }
    SUBCASE("mean over four sample-channel pairs") {
        Tensor act({2, 2, 6, 6});
        double sum = 0.0;
        for (int64_t i = 0; i < 4; ++i) {
            const auto m = random_map(6, 6, rng);
            std::copy(m.begin(), m.end(), act.data.begin() + i * 36);
            sum += ame(m, 6, 6, cfg).value;
        }
        CHECK(layer_entropy(act, cfg) == doctest::Approx(sum / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("network entropy reward") {
    EntropyConfig cfg;
    cfg.bins = 16;
    Rng rng(222);
    Tensor batch({2, 3, 8, 8});
    for (auto& v : batch.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    SUBCASE("a model without conv layers is rejected") {
        ModelGraph g = build_chain({{LayerKind::Flatten, 0}, {LayerKind::Linear, 4}}, 3, 8, 8, 1);
        CHECK_THROWS_AS(network_entropy_reward(g, batch, cfg), std::invalid_argument);
    }
    SUBCASE("all-zero conv outputs give reward 1") {
        ModelGraph g = build_chain({{LayerKind::Conv, 4}, {LayerKind::Relu, 0}}, 3, 8, 8, 1);
        for (auto& v : g.weights[0].data) v = 0.0f;
        CHECK(network_entropy_reward(g, batch, cfg) == doctest::Approx(1.0));
    }
    SUBCASE("single conv layer reward is 1 - layer entropy at the relu output") {
        ModelGraph g = build_chain({{LayerKind::Conv, 4}, {LayerKind::Relu, 0}}, 3, 8, 8, 7);
        const Tensor post = relu_forward(
            conv2d_forward(batch, g.weights[0], g.biases[0], 1, 1));
        const double want = 1.0 - layer_entropy(post, cfg);
        CHECK(network_entropy_reward(g, batch, cfg) == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("reward is one minus the mean of per-layer means") {
        ModelGraph g = build_preset("tinyvgg6", 3, 32, 32, 3);
        Tensor imgs({2, 3, 32, 32});
        for (auto& v : imgs.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
        const EntropyReport rep = network_entropy_report(g, imgs, cfg);
        CHECK(rep.per_layer.size() == 6);
        double mean = 0.0;
        for (const auto& row : rep.per_layer) mean += row.mean_ame;
        mean /= static_cast<double>(rep.per_layer.size());
        CHECK(network_entropy_reward(g, imgs, cfg) == doctest::Approx(1.0 - mean).epsilon(1e-12));
        CHECK(rep.network_mean >= 0.0);
        CHECK(rep.network_mean <= 1.0);
    }
}
