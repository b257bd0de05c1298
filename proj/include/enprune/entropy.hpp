#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "enprune/model_graph.hpp"
#include "enprune/tensor.hpp"

namespace enprune {

// The four second-order neighbor offsets entering the aura matrix entropy.
inline constexpr std::array<std::pair<int, int>, 4> kSecondOrderOffsets{
    {{-1, 0}, {0, -1}, {1, 0}, {0, 1}}};

struct EntropyConfig {
    int64_t bins = 256;  // quantization bin count B, >= 2; log base fixed at 2
};

enum class GridStatus { Valid, ExcludedAllZero, ExcludedConstant };

// Per-channel quantization of an activation map against its own min/max.
// Valid grids contain at least two distinct bin ids.
struct QuantizedGrid {
    int64_t height = 0, width = 0;
    int64_t bins = 0;
    GridStatus status = GridStatus::Valid;
    std::vector<int32_t> cells;  // bin ids in [0, bins), empty when excluded
};

QuantizedGrid quantize_channel(const float* map, int64_t h, int64_t w, int64_t bins);
QuantizedGrid quantize_channel(const std::vector<float>& map, int64_t h, int64_t w, int64_t bins);

// Marginal entropy H(0) in bits over all cells. Requires a Valid grid.
double univariate_entropy(const QuantizedGrid& grid);

struct JointHistogram {
    int dk = 0, dl = 0;
    int64_t bins = 0;
    int64_t pair_count = 0;
    std::vector<int64_t> counts;  // bins x bins, row-major (g, g')
};

// Counts over all in-bounds position pairs ((i,j), (i+dk,j+dl)).
JointHistogram joint_distribution(const QuantizedGrid& grid, int dk, int dl);

// H(k,l) in bits from a joint histogram.
double bivariate_entropy(const JointHistogram& hist);

// Standardized relative bivariate entropy, clamped to [0,1]. H0 must be > 0.
double relative_entropy(double hkl, double h0);

struct AmeResult {
    GridStatus status = GridStatus::Valid;
    double value = 0.0;  // meaningful only when status == Valid
    bool valid() const { return status == GridStatus::Valid; }
};

// Aura matrix entropy: mean of the relative entropies over the four
// second-order neighbor offsets of the quantized map.
AmeResult ame(const float* map, int64_t h, int64_t w, const EntropyConfig& cfg);
AmeResult ame(const std::vector<float>& map, int64_t h, int64_t w, const EntropyConfig& cfg);

struct SdeResult {
    GridStatus status = GridStatus::Valid;
    double value = 0.0;
    // H_R at the four second-order offsets, in kSecondOrderOffsets order;
    // their mean is the AME of the same map.
    std::array<double, 4> second_order_hr{};
    bool valid() const { return status == GridStatus::Valid; }
};

// Spatial disorder entropy: (1/HW) * sum over all position pairs of
// H_R(i-k, j-l). Quadratic in the cell count, so maps are capped at
// H*W <= 4096.
SdeResult sde(const float* map, int64_t h, int64_t w, const EntropyConfig& cfg);
SdeResult sde(const std::vector<float>& map, int64_t h, int64_t w, const EntropyConfig& cfg);

struct LayerEntropyStats {
    double mean = 0.0;  // 0 when no channel is valid
    int64_t valid_channels = 0;
    int64_t excluded_channels = 0;
};

// Mean AME over all (sample, channel) pairs of an N,C,H,W activation tensor.
LayerEntropyStats layer_entropy_stats(const Tensor& activations, const EntropyConfig& cfg);
double layer_entropy(const Tensor& activations, const EntropyConfig& cfg);

struct EntropyReport {
    struct Row {
        int64_t layer_id = -1;
        double mean_ame = 0.0;
        int64_t valid_channels = 0;
        int64_t excluded_channels = 0;
    };
    std::vector<Row> per_layer;
    double network_mean = 0.0;
    int64_t bins = 0;
    int64_t sample_count = 0;
};

// Entropy measured at every conv layer's post-activation output (the relu
// immediately following each conv, or the conv itself when none follows).
EntropyReport network_entropy_report(const ModelGraph& g, const Tensor& batch,
                                     const EntropyConfig& cfg);

// 1 - mean layer entropy across conv layers; the agent's entropy reward.
double network_entropy_reward(const ModelGraph& g, const Tensor& batch, const EntropyConfig& cfg);

}  // namespace enprune
