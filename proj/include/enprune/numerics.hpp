#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "enprune/tensor.hpp"

namespace enprune {

enum class LayerKind { Conv, Relu, MaxPool, AvgPool, Linear, Flatten };

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& s);

// Parameters for the generic layer_forward/layer_backward dispatch.
// Conv:    weight Cout x Cin x Kh x Kw, bias Cout, stride, pad.
// Linear:  weight Out x In, bias Out.
// Pools:   k x k window, stride k.
struct LayerParams {
    LayerKind kind = LayerKind::Relu;
    Tensor weight;
    Tensor bias;
    int64_t stride = 1;
    int64_t pad = 0;
    int64_t pool = 2;
};

struct LayerGrads {
    Tensor input_grad;
    Tensor weight_grad;  // empty for parameter-free layers
    Tensor bias_grad;
};

// C[m][n] = rowinit[n] + sum_k A[m][k] * B[k][n], accumulated in double.
// A is MxK row-major, B is KxN row-major. rowinit may be null (zero init).
void gemm_bias(const float* a, int64_t m, int64_t k, const float* b, int64_t n, float* c,
               const float* rowinit);

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      int64_t stride, int64_t pad);

struct ConvGrads {
    Tensor input_grad;
    Tensor weight_grad;
    Tensor bias_grad;
};
ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight, int64_t stride, int64_t pad,
                          const Tensor& upstream);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

Tensor maxpool_forward(const Tensor& input, int64_t k);
Tensor maxpool_backward(const Tensor& input, int64_t k, const Tensor& upstream);
Tensor avgpool_forward(const Tensor& input, int64_t k);
Tensor avgpool_backward(const Tensor& input, int64_t k, const Tensor& upstream);

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
struct LinearGrads {
    Tensor input_grad;
    Tensor weight_grad;
    Tensor bias_grad;
};
LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& upstream);

Tensor flatten_forward(const Tensor& input);
Tensor flatten_backward(const Tensor& input, const Tensor& upstream);

Tensor layer_forward(const LayerParams& params, const Tensor& input);
LayerGrads layer_backward(const LayerParams& params, const Tensor& cached_input,
                          const Tensor& upstream);

struct PatchProvenance {
    int64_t layer_id = -1;
    std::vector<int64_t> sample_ids;
    std::vector<int64_t> positions;  // output-grid position per row, parallel to sample_ids
};

// Row i holds the flattened (channel-major) receptive field for output
// position i; conv output equals PatchMatrix x weight^T.
struct PatchMatrix : Mat {
    PatchProvenance provenance;
};

PatchMatrix im2col(const Tensor& input, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                   const std::vector<int64_t>* positions = nullptr);

struct LeastSquaresResult {
    Mat w;  // P x Q
    bool ridge_fallback = false;
    bool underdetermined = false;
};

// Minimizes |XW - Y|^2 + ridge*|W|^2 via normal equations with a symmetric
// positive-definite (Cholesky) solve in double precision. A singular system at
// ridge 0 falls back to ridge = 1e-6 * trace(X^T X)/P and sets ridge_fallback.
LeastSquaresResult least_squares(const Mat& x, const Mat& y, double ridge);

}  // namespace enprune
