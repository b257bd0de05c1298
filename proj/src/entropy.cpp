#include "enprune/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace enprune {

namespace {

void check_map_size(int64_t h, int64_t w) {
    if (h < 2 || w < 2)
        throw std::invalid_argument("entropy: map must be at least 2x2 (got " + std::to_string(h) +
                                    "x" + std::to_string(w) + "); no spatial pairs exist");
}

// Entropy in bits of a multiset given as a sorted key array.
double entropy_of_sorted_keys(std::vector<uint64_t>& keys) {
    const double total = static_cast<double>(keys.size());
    if (keys.empty()) return 0.0;
    std::sort(keys.begin(), keys.end());
    double h = 0.0;
    size_t run_start = 0;
    for (size_t i = 1; i <= keys.size(); ++i) {
        if (i == keys.size() || keys[i] != keys[run_start]) {
            const double p = static_cast<double>(i - run_start) / total;
            h -= p * std::log2(p);
            run_start = i;
        }
    }
    return h;
}

// H(dk,dl) of a valid grid without materializing the dense histogram.
double offset_joint_entropy(const QuantizedGrid& g, int dk, int dl,
                            std::vector<uint64_t>& scratch) {
    scratch.clear();
    const int64_t h = g.height, w = g.width;
    const int64_t i_lo = std::max<int64_t>(0, -dk), i_hi = std::min<int64_t>(h, h - dk);
    const int64_t j_lo = std::max<int64_t>(0, -dl), j_hi = std::min<int64_t>(w, w - dl);
    const uint64_t b = static_cast<uint64_t>(g.bins);
    for (int64_t i = i_lo; i < i_hi; ++i) {
        const int32_t* row = g.cells.data() + i * w;
        const int32_t* row2 = g.cells.data() + (i + dk) * w + dl;
        for (int64_t j = j_lo; j < j_hi; ++j)
            scratch.push_back(static_cast<uint64_t>(row[j]) * b + static_cast<uint64_t>(row2[j]));
    }
    return entropy_of_sorted_keys(scratch);
}

double grid_h0(const QuantizedGrid& g, std::vector<uint64_t>& scratch) {
    scratch.clear();
    for (int32_t c : g.cells) scratch.push_back(static_cast<uint64_t>(c));
    return entropy_of_sorted_keys(scratch);
}

}  // namespace

QuantizedGrid quantize_channel(const float* map, int64_t h, int64_t w, int64_t bins) {
    check_map_size(h, w);
    if (bins < 2) throw std::invalid_argument("entropy: bins must be >= 2");
    QuantizedGrid g;
    g.height = h;
    g.width = w;
    g.bins = bins;

    const int64_t n = h * w;
    float lo = map[0], hi = map[0];
    bool all_zero = true;
    for (int64_t i = 0; i < n; ++i) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
        if (map[i] != 0.0f) all_zero = false;
    }
    if (all_zero) {
        g.status = GridStatus::ExcludedAllZero;
        return g;
    }
    if (lo == hi) {
        g.status = GridStatus::ExcludedConstant;
        return g;
    }
    g.cells.resize(static_cast<size_t>(n));
    const double range = static_cast<double>(hi) - static_cast<double>(lo);
    const double scale = static_cast<double>(bins) / range;
    for (int64_t i = 0; i < n; ++i) {
        const double t = (static_cast<double>(map[i]) - static_cast<double>(lo)) * scale;
        g.cells[static_cast<size_t>(i)] =
            static_cast<int32_t>(std::min<int64_t>(static_cast<int64_t>(t), bins - 1));
    }
    return g;
}

QuantizedGrid quantize_channel(const std::vector<float>& map, int64_t h, int64_t w, int64_t bins) {
    if (static_cast<int64_t>(map.size()) != h * w)
        throw std::invalid_argument("quantize_channel: map size does not match extents");
    return quantize_channel(map.data(), h, w, bins);
}

double univariate_entropy(const QuantizedGrid& grid) {
    if (grid.status != GridStatus::Valid)
        throw std::invalid_argument("univariate_entropy: called on an excluded grid");
    std::vector<uint64_t> scratch;
    return grid_h0(grid, scratch);
}

JointHistogram joint_distribution(const QuantizedGrid& grid, int dk, int dl) {
    if (grid.status != GridStatus::Valid)
        throw std::invalid_argument("joint_distribution: called on an excluded grid");
    bool known = false;
    for (const auto& [k, l] : kSecondOrderOffsets)
        if (k == dk && l == dl) known = true;
    if (!known)
        throw std::invalid_argument("joint_distribution: offset (" + std::to_string(dk) + "," +
                                    std::to_string(dl) + ") is not a second-order neighbor");

    JointHistogram hist;
    hist.dk = dk;
    hist.dl = dl;
    hist.bins = grid.bins;
    hist.counts.assign(static_cast<size_t>(grid.bins * grid.bins), 0);
    const int64_t h = grid.height, w = grid.width;
    const int64_t i_lo = std::max<int64_t>(0, -dk), i_hi = std::min<int64_t>(h, h - dk);
    const int64_t j_lo = std::max<int64_t>(0, -dl), j_hi = std::min<int64_t>(w, w - dl);
    for (int64_t i = i_lo; i < i_hi; ++i)
        for (int64_t j = j_lo; j < j_hi; ++j) {
            const int32_t g = grid.cells[static_cast<size_t>(i * w + j)];
            const int32_t g2 = grid.cells[static_cast<size_t>((i + dk) * w + (j + dl))];
            hist.counts[static_cast<size_t>(g * grid.bins + g2)] += 1;
            ++hist.pair_count;
        }
    return hist;
}

double bivariate_entropy(const JointHistogram& hist) {
    if (hist.pair_count < 1)
        throw std::invalid_argument("bivariate_entropy: histogram holds no pairs");
    const double total = static_cast<double>(hist.pair_count);
    double h = 0.0;
    for (int64_t c : hist.counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

double relative_entropy(double hkl, double h0) {
    if (h0 <= 0.0)
        throw std::invalid_argument(
            "relative_entropy: H(0) must be positive (exclude constant grids first)");
    return std::clamp((hkl - h0) / h0, 0.0, 1.0);
}

AmeResult ame(const float* map, int64_t h, int64_t w, const EntropyConfig& cfg) {
    const QuantizedGrid grid = quantize_channel(map, h, w, cfg.bins);
    AmeResult res;
    res.status = grid.status;
    if (grid.status != GridStatus::Valid) return res;

    std::vector<uint64_t> scratch;
    scratch.reserve(static_cast<size_t>(h * w));
    const double h0 = grid_h0(grid, scratch);
    double sum = 0.0;
    for (const auto& [dk, dl] : kSecondOrderOffsets)
        sum += relative_entropy(offset_joint_entropy(grid, dk, dl, scratch), h0);
    res.value = sum / 4.0;
    return res;
}

AmeResult ame(const std::vector<float>& map, int64_t h, int64_t w, const EntropyConfig& cfg) {
    if (static_cast<int64_t>(map.size()) != h * w)
        throw std::invalid_argument("ame: map size does not match extents");
    return ame(map.data(), h, w, cfg);
}

SdeResult sde(const float* map, int64_t h, int64_t w, const EntropyConfig& cfg) {
    check_map_size(h, w);
    if (h * w > 4096)
        throw std::invalid_argument("sde: map of " + std::to_string(h * w) +
                                    " cells exceeds the 4096-cell bound (cost is quadratic)");
    const QuantizedGrid grid = quantize_channel(map, h, w, cfg.bins);
    SdeResult res;
    res.status = grid.status;
    if (grid.status != GridStatus::Valid) return res;

    std::vector<uint64_t> scratch;
    const double h0 = grid_h0(grid, scratch);

    // H_R depends only on the offset; (h-|dk|)(w-|dl|) position pairs share it.
    double sum = 0.0;
    for (int64_t dk = -(h - 1); dk <= h - 1; ++dk)
        for (int64_t dl = -(w - 1); dl <= w - 1; ++dl) {
            if (dk == 0 && dl == 0) continue;  // H_R(0,0) is 0 by definition
            const double hr = relative_entropy(
                offset_joint_entropy(grid, static_cast<int>(dk), static_cast<int>(dl), scratch),
                h0);
            const double mult =
                static_cast<double>((h - std::llabs(dk)) * (w - std::llabs(dl)));
            sum += hr * mult;
            for (size_t o = 0; o < kSecondOrderOffsets.size(); ++o)
                if (kSecondOrderOffsets[o].first == dk && kSecondOrderOffsets[o].second == dl)
                    res.second_order_hr[o] = hr;
        }
    res.value = sum / static_cast<double>(h * w);
    return res;
}

SdeResult sde(const std::vector<float>& map, int64_t h, int64_t w, const EntropyConfig& cfg) {
    if (static_cast<int64_t>(map.size()) != h * w)
        throw std::invalid_argument("sde: map size does not match extents");
    return sde(map.data(), h, w, cfg);
}

LayerEntropyStats layer_entropy_stats(const Tensor& activations, const EntropyConfig& cfg) {
    if (activations.rank() != 4)
        throw std::invalid_argument("layer_entropy: activations must be N,C,H,W, got " +
                                    shape_str(activations.shape));
    const int64_t n = activations.dim(0), c = activations.dim(1);
    const int64_t h = activations.dim(2), w = activations.dim(3);
    check_map_size(h, w);

    LayerEntropyStats stats;
    double sum = 0.0;
    for (int64_t s = 0; s < n; ++s)
        for (int64_t ch = 0; ch < c; ++ch) {
            const AmeResult r = ame(activations.data.data() + (s * c + ch) * h * w, h, w, cfg);
            if (r.valid()) {
                sum += r.value;
                ++stats.valid_channels;
            } else {
                ++stats.excluded_channels;
            }
        }
    stats.mean = stats.valid_channels > 0 ? sum / static_cast<double>(stats.valid_channels) : 0.0;
    return stats;
}

double layer_entropy(const Tensor& activations, const EntropyConfig& cfg) {
    return layer_entropy_stats(activations, cfg).mean;
}

namespace {

// Conv layers paired with their measurement point: the relu immediately
// following the conv when present, otherwise the conv output itself.
std::vector<std::pair<int64_t, int64_t>> entropy_taps(const ModelGraph& g) {
    std::vector<std::pair<int64_t, int64_t>> taps;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        if (g.layers[i].kind != LayerKind::Conv) continue;
        int64_t tap = static_cast<int64_t>(i);
        if (i + 1 < g.layers.size() && g.layers[i + 1].kind == LayerKind::Relu)
            tap = static_cast<int64_t>(i + 1);
        taps.emplace_back(static_cast<int64_t>(i), tap);
    }
    return taps;
}

}  // namespace

EntropyReport network_entropy_report(const ModelGraph& g, const Tensor& batch,
                                     const EntropyConfig& cfg) {
    const auto taps = entropy_taps(g);
    if (taps.empty())
        throw std::invalid_argument("network entropy: model has no convolutional layers");
    if (batch.rank() != 4 || batch.dim(0) < 1)
        throw std::invalid_argument("network entropy: batch must be a nonempty N,C,H,W tensor");

    EntropyReport report;
    report.bins = cfg.bins;
    report.sample_count = batch.dim(0);
    report.per_layer.resize(taps.size());
    g.forward_collect(batch, [&](int64_t idx, const Tensor& out) {
        for (size_t t = 0; t < taps.size(); ++t) {
            if (taps[t].second != idx) continue;
            const LayerEntropyStats stats = layer_entropy_stats(out, cfg);
            report.per_layer[t] = {taps[t].first, stats.mean, stats.valid_channels,
                                   stats.excluded_channels};
        }
    });
    double sum = 0.0;
    for (const auto& row : report.per_layer) sum += row.mean_ame;
    report.network_mean = sum / static_cast<double>(report.per_layer.size());
    return report;
}

double network_entropy_reward(const ModelGraph& g, const Tensor& batch, const EntropyConfig& cfg) {
    return 1.0 - network_entropy_report(g, batch, cfg).network_mean;
}

}  // namespace enprune
