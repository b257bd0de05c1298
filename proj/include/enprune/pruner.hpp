#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enprune/model_graph.hpp"
#include "enprune/numerics.hpp"
#include "enprune/rng.hpp"

namespace enprune {

// Filter indices ascending by L2 norm; ties broken by lower index first.
std::vector<int64_t> rank_filters_l2(const Tensor& weight);

// Number of filters kept at sparsity a: ceil((1-a)*n), at least 1.
int64_t select_kept(int64_t n_filters, double sparsity);

// The select_kept(n,a) largest-norm filters, sorted ascending.
std::vector<int64_t> kept_filter_indices(const Tensor& weight, double sparsity);

// Per-prunable-layer sparsity ratios, in layer order.
struct SparsityPlan {
    std::vector<std::pair<int64_t, double>> entries;  // (layer id, sparsity)
};

// Plan file: one line per layer, "layer_id<TAB>sparsity" with 6 decimals.
void save_plan(const SparsityPlan& plan, const std::string& path);
SparsityPlan load_plan(const std::string& path);

// Patches and original outputs captured from the unpruned network in one
// pass, per prunable layer plus the first linear after flatten. Patch columns
// come in channel blocks of `cols_per_channel` each, matching the weight
// layout of the layer they are used to refit.
struct CalibrationEntry {
    int64_t layer_index = -1;
    LayerKind kind = LayerKind::Conv;
    int64_t channels = 0;          // input channels of this layer
    int64_t cols_per_channel = 0;  // conv: kh*kw, linear: flattened spatial block
    PatchMatrix patches;           // rows: samples x positions (conv) or samples (linear)
    Mat outputs;                   // aligned rows, one column per output unit
};

struct CalibrationCache {
    int64_t sample_count = 0;
    int64_t positions_per_sample = 0;
    std::vector<CalibrationEntry> entries;

    const CalibrationEntry& entry_for(int64_t layer_index) const;
};

CalibrationCache build_calibration_cache(const ModelGraph& g, const Tensor& samples,
                                         int64_t positions_per_sample, Rng& rng);

struct ReconstructedLayer {
    Tensor weight;
    Tensor bias;
    bool underdetermined = false;
    bool ridge_fallback = false;
};

// Refits a layer against its calibration entry after its input channels were
// restricted to kept_in and its outputs to kept_out (both in original
// indices). The bias is refit jointly through an appended ones column.
ReconstructedLayer reconstruct_layer(const CalibrationEntry& entry,
                                     const std::vector<int64_t>& kept_in,
                                     const std::vector<int64_t>& kept_out, double ridge);

// Residual |XW - Y|^2 of a candidate (weight, bias) on a calibration entry,
// restricted the same way; used to compare reconstruction with truncation.
double calibration_residual(const CalibrationEntry& entry, const std::vector<int64_t>& kept_in,
                            const std::vector<int64_t>& kept_out, const Tensor& weight,
                            const Tensor& bias);

// Walks prunable layers in order: rank by L2, drop filters per the plan,
// truncate the successor's input slices, then least-squares refit the
// successor on the cache. The classifier output dimension is never pruned.
ModelGraph prune_network(const ModelGraph& g, const SparsityPlan& plan,
                         const CalibrationCache& cache, double ridge);

}  // namespace enprune
