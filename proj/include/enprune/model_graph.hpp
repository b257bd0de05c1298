#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "enprune/numerics.hpp"
#include "enprune/tensor.hpp"

namespace enprune {

// One stage of a chain network. c_in/c_out are channels for conv and
// passthrough stages, features for linear. Spatial extents are resolved when
// the graph is built and re-resolved after any structural edit.
struct LayerSpec {
    int64_t id = -1;
    LayerKind kind = LayerKind::Relu;
    int64_t c_in = 0;
    int64_t c_out = 0;
    int64_t kh = 0, kw = 0;
    int64_t stride = 1, pad = 0;
    int64_t pool = 2;
    int64_t in_h = 0, in_w = 0;
    int64_t out_h = 0, out_w = 0;

    bool parameterized() const { return kind == LayerKind::Conv || kind == LayerKind::Linear; }
};

struct ModelGraph {
    int64_t input_c = 0, input_h = 0, input_w = 0;
    std::vector<LayerSpec> layers;
    std::vector<Tensor> weights;  // parallel to layers; empty for parameter-free stages
    std::vector<Tensor> biases;

    LayerParams layer_params(int64_t idx) const;
    Tensor forward(const Tensor& input) const;
    // Forward pass invoking sink(layer_index, output) after every layer.
    Tensor forward_collect(const Tensor& input,
                           const std::function<void(int64_t, const Tensor&)>& sink) const;

    std::vector<int64_t> prunable_layers() const;  // conv layer indices, in order
    int64_t next_parameterized(int64_t idx) const;  // -1 past the classifier
    int64_t conv_layer_count() const;

    // Recomputes chain channel counts and spatial extents from input_* and the
    // parameterized layers; throws if the chain is inconsistent.
    void resolve();
};

bool graphs_equal(const ModelGraph& a, const ModelGraph& b);

// Chain description item for builders: conv is 3x3 stride 1 pad 1 with the
// given output channels, pool is maxpool 2x2 stride 2, linear maps to the
// given output features.
struct ChainItem {
    LayerKind kind;
    int64_t arg = 0;
};

ModelGraph build_chain(const std::vector<ChainItem>& items, int64_t in_c, int64_t in_h,
                       int64_t in_w, uint64_t init_seed);

// Presets: "tinyvgg6" (6 convs, desk scale) and "vgg16" (13 convs + linear
// classifier).
ModelGraph build_preset(const std::string& name, int64_t in_c, int64_t in_h, int64_t in_w,
                        uint64_t init_seed);

// Same specs, freshly initialized weights.
ModelGraph fresh_init_like(const ModelGraph& g, uint64_t init_seed);

// Multiply-accumulate counted as 2 FLOPS; parameter-free layers count 0.
int64_t count_flops(const LayerSpec& spec);
int64_t total_flops(const ModelGraph& g);
int64_t parameter_count(const ModelGraph& g);

struct FlopsReport {
    std::vector<int64_t> per_layer;
    int64_t total = 0;
    double ratio = 1.0;  // vs reference graph
};
FlopsReport flops_report(const ModelGraph& pruned, const ModelGraph& original);
double preserved_ratio(const ModelGraph& pruned, const ModelGraph& original);

// Drops conv output channels not listed in `kept` (sorted, unique, nonempty)
// and the matching input slices of the next parameterized layer, then
// re-resolves the chain. Returns a new graph.
ModelGraph remove_output_channels(const ModelGraph& g, int64_t layer_index,
                                  const std::vector<int64_t>& kept);

}  // namespace enprune
