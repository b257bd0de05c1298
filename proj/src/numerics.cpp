#include "enprune/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace enprune {

std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::AvgPool: return "avgpool";
        case LayerKind::Linear: return "linear";
        case LayerKind::Flatten: return "flatten";
    }
    throw std::invalid_argument("layer_kind_name: unknown kind");
}

LayerKind layer_kind_from_name(const std::string& s) {
    if (s == "conv") return LayerKind::Conv;
    if (s == "relu") return LayerKind::Relu;
    if (s == "maxpool") return LayerKind::MaxPool;
    if (s == "avgpool") return LayerKind::AvgPool;
    if (s == "linear") return LayerKind::Linear;
    if (s == "flatten") return LayerKind::Flatten;
    throw std::invalid_argument("unsupported layer kind: " + s);
}

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad, const char* axis) {
    const int64_t span = in + 2 * pad - k;
    if (span < 0 || span % stride != 0)
        throw std::invalid_argument(std::string("conv2d: non-integer output extent along ") + axis +
                                    " (in=" + std::to_string(in) + " k=" + std::to_string(k) +
                                    " stride=" + std::to_string(stride) +
                                    " pad=" + std::to_string(pad) + ")");
    return span / stride + 1;
}

// Lowered input patch block in K-major order: row k=(c*Kh+ky)*Kw+kx holds the
// value at every output position p=(oy*OW+ox). Out-of-bounds reads are zero.
void im2col_t(const float* in, int64_t c_in, int64_t h, int64_t w, int64_t kh, int64_t kw,
              int64_t stride, int64_t pad, int64_t oh, int64_t ow, float* out) {
    const int64_t positions = oh * ow;
    for (int64_t c = 0; c < c_in; ++c) {
        const float* chan = in + c * h * w;
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                float* dst = out + ((c * kh + ky) * kw + kx) * positions;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    const int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) {
                        std::memset(dst + oy * ow, 0, static_cast<size_t>(ow) * sizeof(float));
                        continue;
                    }
                    const float* src = chan + iy * w;
                    float* row = dst + oy * ow;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        const int64_t ix = ox * stride + kx - pad;
                        row[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

// Scatter-add of a lowered gradient block back onto the input gradient.
void col2im_t(const float* cols, int64_t c_in, int64_t h, int64_t w, int64_t kh, int64_t kw,
              int64_t stride, int64_t pad, int64_t oh, int64_t ow, float* grad) {
    const int64_t positions = oh * ow;
    for (int64_t c = 0; c < c_in; ++c) {
        float* chan = grad + c * h * w;
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                const float* src = cols + ((c * kh + ky) * kw + kx) * positions;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    const int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    float* row = chan + iy * w;
                    const float* srow = src + oy * ow;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        const int64_t ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) row[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

// acc[:] += sum over four consecutive k of A[m][k] * B[k][:], then the scalar
// remainder. Adds per output cell stay in ascending-k order, so the result is
// bit-identical to the plain loop; unrolling only batches the acc[] traffic.
void gemm_rows_into(const float* __restrict arow, int64_t k, const float* __restrict b, int64_t n,
                    double* __restrict s) {
    int64_t kk = 0;
    for (; kk + 4 <= k; kk += 4) {
        const double a0 = arow[kk], a1 = arow[kk + 1], a2 = arow[kk + 2], a3 = arow[kk + 3];
        if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
        const float* __restrict b0 = b + kk * n;
        const float* __restrict b1 = b0 + n;
        const float* __restrict b2 = b1 + n;
        const float* __restrict b3 = b2 + n;
        for (int64_t j = 0; j < n; ++j) {
            double t = s[j];
            t += a0 * static_cast<double>(b0[j]);
            t += a1 * static_cast<double>(b1[j]);
            t += a2 * static_cast<double>(b2[j]);
            t += a3 * static_cast<double>(b3[j]);
            s[j] = t;
        }
    }
    for (; kk < k; ++kk) {
        const double av = static_cast<double>(arow[kk]);
        if (av == 0.0) continue;
        const float* __restrict brow = b + kk * n;
        for (int64_t j = 0; j < n; ++j) s[j] += av * static_cast<double>(brow[j]);
    }
}

// C[m][:] = rowinit_m + sum_k A[m][k] * B[k][:], double accumulators. The
// per-cell summation order is fixed (ascending k), so results are independent
// of call batching.
void gemm_rowconst(const float* __restrict a, int64_t m, int64_t k, const float* __restrict b,
                   int64_t n, float* __restrict c, const float* rowinit, std::vector<double>& acc) {
    acc.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < m; ++i) {
        double* __restrict s = acc.data();
        const double init = rowinit ? static_cast<double>(rowinit[i]) : 0.0;
        for (int64_t j = 0; j < n; ++j) s[j] = init;
        gemm_rows_into(a + i * k, k, b, n, s);
        float* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] = static_cast<float>(s[j]);
    }
}

// C_acc[m][:] += sum_k A[m][k] * B[k][:], accumulating across calls in double.
void gemm_acc(const float* __restrict a, int64_t m, int64_t k, const float* __restrict b,
              int64_t n, double* __restrict c) {
    for (int64_t i = 0; i < m; ++i) gemm_rows_into(a + i * k, k, b, n, c + i * n);
}

void transpose(const float* src, int64_t rows, int64_t cols, float* dst) {
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace

void gemm_bias(const float* a, int64_t m, int64_t k, const float* b, int64_t n, float* c,
               const float* rowinit) {
    std::vector<double> acc;
    gemm_rowconst(a, m, k, b, n, c, rowinit, acc);
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      int64_t stride, int64_t pad) {
    require(input.rank() == 4, "conv2d: input must be N,C,H,W, got " + shape_str(input.shape));
    require(weight.rank() == 4,
            "conv2d: weight must be Cout,Cin,Kh,Kw, got " + shape_str(weight.shape));
    require(stride >= 1, "conv2d: stride must be positive");
    require(pad >= 0, "conv2d: pad must be non-negative");
    const int64_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    require(weight.dim(1) == c_in, "conv2d: channel mismatch, input " + shape_str(input.shape) +
                                       " vs weight " + shape_str(weight.shape));
    require(bias.rank() == 1 && bias.dim(0) == c_out,
            "conv2d: bias must have shape (Cout), got " + shape_str(bias.shape));
    const int64_t oh = conv_out_extent(h, kh, stride, pad, "H");
    const int64_t ow = conv_out_extent(w, kw, stride, pad, "W");

    Tensor out({n, c_out, oh, ow});
    const int64_t kdim = c_in * kh * kw;
    const int64_t positions = oh * ow;
    std::vector<float> cols(static_cast<size_t>(kdim * positions));
    std::vector<double> acc;
    for (int64_t s = 0; s < n; ++s) {
        im2col_t(input.data.data() + s * c_in * h * w, c_in, h, w, kh, kw, stride, pad, oh, ow,
                 cols.data());
        gemm_rowconst(weight.data.data(), c_out, kdim, cols.data(), positions,
                      out.data.data() + s * c_out * positions, bias.data.data(), acc);
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight, int64_t stride, int64_t pad,
                          const Tensor& upstream) {
    require(input.rank() == 4 && weight.rank() == 4 && upstream.rank() == 4,
            "conv2d_backward: rank-4 tensors required");
    const int64_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    const int64_t oh = conv_out_extent(h, kh, stride, pad, "H");
    const int64_t ow = conv_out_extent(w, kw, stride, pad, "W");
    require(upstream.dim(0) == n && upstream.dim(1) == c_out && upstream.dim(2) == oh &&
                upstream.dim(3) == ow,
            "conv2d_backward: upstream shape " + shape_str(upstream.shape) +
                " does not match forward output");

    const int64_t kdim = c_in * kh * kw;
    const int64_t positions = oh * ow;

    ConvGrads g;
    g.input_grad = Tensor(input.shape);
    g.weight_grad = Tensor(weight.shape);
    g.bias_grad = Tensor({c_out});

    // bias: plain sums over all positions, per channel.
    for (int64_t oc = 0; oc < c_out; ++oc) {
        double sum = 0.0;
        for (int64_t s = 0; s < n; ++s) {
            const float* blk = upstream.data.data() + (s * c_out + oc) * positions;
            for (int64_t p = 0; p < positions; ++p) sum += static_cast<double>(blk[p]);
        }
        g.bias_grad(oc) = static_cast<float>(sum);
    }

    // weight^T accumulator (kdim x c_out) summed sample by sample in double.
    std::vector<double> wt_acc(static_cast<size_t>(kdim * c_out), 0.0);
    std::vector<float> cols(static_cast<size_t>(kdim * positions));
    std::vector<float> gout_t(static_cast<size_t>(positions * c_out));
    std::vector<float> wtrans(static_cast<size_t>(kdim * c_out));
    std::vector<float> gin_cols(static_cast<size_t>(kdim * positions));
    std::vector<double> acc;
    transpose(weight.data.data(), c_out, kdim, wtrans.data());

    for (int64_t s = 0; s < n; ++s) {
        const float* gout = upstream.data.data() + s * c_out * positions;  // c_out x positions
        im2col_t(input.data.data() + s * c_in * h * w, c_in, h, w, kh, kw, stride, pad, oh, ow,
                 cols.data());
        transpose(gout, c_out, positions, gout_t.data());
        gemm_acc(cols.data(), kdim, positions, gout_t.data(), c_out, wt_acc.data());

        gemm_rowconst(wtrans.data(), kdim, c_out, gout, positions, gin_cols.data(), nullptr, acc);
        col2im_t(gin_cols.data(), c_in, h, w, kh, kw, stride, pad, oh, ow,
                 g.input_grad.data.data() + s * c_in * h * w);
    }
    for (int64_t oc = 0; oc < c_out; ++oc)
        for (int64_t k = 0; k < kdim; ++k)
            g.weight_grad.data[static_cast<size_t>(oc * kdim + k)] =
                static_cast<float>(wt_acc[static_cast<size_t>(k * c_out + oc)]);
    return g;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape);
    for (size_t i = 0; i < input.data.size(); ++i) out.data[i] = std::max(input.data[i], 0.0f);
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
    require(input.same_shape(upstream), "relu_backward: shape mismatch " +
                                            shape_str(input.shape) + " vs " +
                                            shape_str(upstream.shape));
    Tensor g(input.shape);
    for (size_t i = 0; i < input.data.size(); ++i)
        g.data[i] = input.data[i] > 0.0f ? upstream.data[i] : 0.0f;
    return g;
}

namespace {
void check_pool_shape(const Tensor& input, int64_t k) {
    require(input.rank() == 4, "pool: input must be N,C,H,W, got " + shape_str(input.shape));
    require(k >= 1, "pool: window must be positive");
    require(input.dim(2) % k == 0 && input.dim(3) % k == 0,
            "pool: spatial extents " + shape_str(input.shape) + " not divisible by window " +
                std::to_string(k));
}
}  // namespace

Tensor maxpool_forward(const Tensor& input, int64_t k) {
    check_pool_shape(input, k);
    const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t oh = h / k, ow = w / k;
    Tensor out({n, c, oh, ow});
    for (int64_t s = 0; s < n; ++s)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    float m = input(s, ch, oy * k, ox * k);
                    for (int64_t dy = 0; dy < k; ++dy)
                        for (int64_t dx = 0; dx < k; ++dx)
                            m = std::max(m, input(s, ch, oy * k + dy, ox * k + dx));
                    out(s, ch, oy, ox) = m;
                }
    return out;
}

Tensor maxpool_backward(const Tensor& input, int64_t k, const Tensor& upstream) {
    check_pool_shape(input, k);
    const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t oh = h / k, ow = w / k;
    require(upstream.rank() == 4 && upstream.dim(0) == n && upstream.dim(1) == c &&
                upstream.dim(2) == oh && upstream.dim(3) == ow,
            "maxpool_backward: upstream shape mismatch " + shape_str(upstream.shape));
    Tensor g(input.shape);
    for (int64_t s = 0; s < n; ++s)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    // gradient routed to the first maximum in scan order
                    int64_t by = oy * k, bx = ox * k;
                    float m = input(s, ch, by, bx);
                    for (int64_t dy = 0; dy < k; ++dy)
                        for (int64_t dx = 0; dx < k; ++dx) {
                            const float v = input(s, ch, oy * k + dy, ox * k + dx);
                            if (v > m) {
                                m = v;
                                by = oy * k + dy;
                                bx = ox * k + dx;
                            }
                        }
                    g(s, ch, by, bx) += upstream(s, ch, oy, ox);
                }
    return g;
}

Tensor avgpool_forward(const Tensor& input, int64_t k) {
    check_pool_shape(input, k);
    const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t oh = h / k, ow = w / k;
    const double inv = 1.0 / static_cast<double>(k * k);
    Tensor out({n, c, oh, ow});
    for (int64_t s = 0; s < n; ++s)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    double sum = 0.0;
                    for (int64_t dy = 0; dy < k; ++dy)
                        for (int64_t dx = 0; dx < k; ++dx)
                            sum += input(s, ch, oy * k + dy, ox * k + dx);
                    out(s, ch, oy, ox) = static_cast<float>(sum * inv);
                }
    return out;
}

Tensor avgpool_backward(const Tensor& input, int64_t k, const Tensor& upstream) {
    check_pool_shape(input, k);
    const int64_t n = input.dim(0), c = input.dim(1);
    const int64_t oh = input.dim(2) / k, ow = input.dim(3) / k;
    require(upstream.rank() == 4 && upstream.dim(0) == n && upstream.dim(1) == c &&
                upstream.dim(2) == oh && upstream.dim(3) == ow,
            "avgpool_backward: upstream shape mismatch " + shape_str(upstream.shape));
    const float inv = 1.0f / static_cast<float>(k * k);
    Tensor g(input.shape);
    for (int64_t s = 0; s < n; ++s)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    const float v = upstream(s, ch, oy, ox) * inv;
                    for (int64_t dy = 0; dy < k; ++dy)
                        for (int64_t dx = 0; dx < k; ++dx) g(s, ch, oy * k + dy, ox * k + dx) += v;
                }
    return g;
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require(input.rank() == 2, "linear: input must be N,F, got " + shape_str(input.shape));
    require(weight.rank() == 2, "linear: weight must be Out,In, got " + shape_str(weight.shape));
    const int64_t n = input.dim(0), f = input.dim(1);
    const int64_t out_f = weight.dim(0);
    require(weight.dim(1) == f, "linear: feature mismatch, input " + shape_str(input.shape) +
                                    " vs weight " + shape_str(weight.shape));
    require(bias.rank() == 1 && bias.dim(0) == out_f,
            "linear: bias must have shape (Out), got " + shape_str(bias.shape));

    // out^T = weight (Out x In) * input^T (In x N), bias constant per row.
    std::vector<float> in_t(static_cast<size_t>(f * n));
    std::vector<float> out_t(static_cast<size_t>(out_f * n));
    transpose(input.data.data(), n, f, in_t.data());
    gemm_bias(weight.data.data(), out_f, f, in_t.data(), n, out_t.data(), bias.data.data());
    Tensor out({n, out_f});
    transpose(out_t.data(), out_f, n, out.data.data());
    return out;
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& upstream) {
    require(input.rank() == 2 && weight.rank() == 2 && upstream.rank() == 2,
            "linear_backward: rank-2 tensors required");
    const int64_t n = input.dim(0), f = input.dim(1), out_f = weight.dim(0);
    require(upstream.dim(0) == n && upstream.dim(1) == out_f,
            "linear_backward: upstream shape mismatch " + shape_str(upstream.shape));

    LinearGrads g;
    g.input_grad = Tensor({n, f});
    g.weight_grad = Tensor(weight.shape);
    g.bias_grad = Tensor({out_f});

    // input grad: upstream (N x Out) * weight (Out x In)
    gemm_bias(upstream.data.data(), n, out_f, weight.data.data(), f, g.input_grad.data.data(),
              nullptr);

    // weight grad: upstream^T (Out x N) * input (N x In)
    std::vector<float> up_t(static_cast<size_t>(out_f * n));
    transpose(upstream.data.data(), n, out_f, up_t.data());
    gemm_bias(up_t.data(), out_f, n, input.data.data(), f, g.weight_grad.data.data(), nullptr);

    for (int64_t oc = 0; oc < out_f; ++oc) {
        double sum = 0.0;
        for (int64_t s = 0; s < n; ++s) sum += static_cast<double>(upstream(s, oc));
        g.bias_grad(oc) = static_cast<float>(sum);
    }
    return g;
}

Tensor flatten_forward(const Tensor& input) {
    require(input.rank() == 4, "flatten: input must be N,C,H,W, got " + shape_str(input.shape));
    Tensor out = input;
    out.shape = {input.dim(0), input.dim(1) * input.dim(2) * input.dim(3)};
    return out;
}

Tensor flatten_backward(const Tensor& input, const Tensor& upstream) {
    require(upstream.size() == input.size(), "flatten_backward: size mismatch");
    Tensor g = upstream;
    g.shape = input.shape;
    return g;
}

Tensor layer_forward(const LayerParams& params, const Tensor& input) {
    switch (params.kind) {
        case LayerKind::Conv:
            return conv2d_forward(input, params.weight, params.bias, params.stride, params.pad);
        case LayerKind::Relu: return relu_forward(input);
        case LayerKind::MaxPool: return maxpool_forward(input, params.pool);
        case LayerKind::AvgPool: return avgpool_forward(input, params.pool);
        case LayerKind::Linear: return linear_forward(input, params.weight, params.bias);
        case LayerKind::Flatten: return flatten_forward(input);
    }
    throw std::invalid_argument("layer_forward: unsupported layer kind");
}

LayerGrads layer_backward(const LayerParams& params, const Tensor& cached_input,
                          const Tensor& upstream) {
    if (cached_input.data.empty())
        throw std::invalid_argument("layer_backward: missing cached forward input");
    LayerGrads g;
    switch (params.kind) {
        case LayerKind::Conv: {
            ConvGrads cg =
                conv2d_backward(cached_input, params.weight, params.stride, params.pad, upstream);
            g.input_grad = std::move(cg.input_grad);
            g.weight_grad = std::move(cg.weight_grad);
            g.bias_grad = std::move(cg.bias_grad);
            return g;
        }
        case LayerKind::Relu: g.input_grad = relu_backward(cached_input, upstream); return g;
        case LayerKind::MaxPool:
            g.input_grad = maxpool_backward(cached_input, params.pool, upstream);
            return g;
        case LayerKind::AvgPool:
            g.input_grad = avgpool_backward(cached_input, params.pool, upstream);
            return g;
        case LayerKind::Linear: {
            LinearGrads lg = linear_backward(cached_input, params.weight, upstream);
            g.input_grad = std::move(lg.input_grad);
            g.weight_grad = std::move(lg.weight_grad);
            g.bias_grad = std::move(lg.bias_grad);
            return g;
        }
        case LayerKind::Flatten:
            g.input_grad = flatten_backward(cached_input, upstream);
            return g;
    }
    throw std::invalid_argument("layer_backward: unsupported layer kind");
}

PatchMatrix im2col(const Tensor& input, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                   const std::vector<int64_t>* positions) {
    require(input.rank() == 4, "im2col: input must be N,C,H,W, got " + shape_str(input.shape));
    const int64_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t oh = conv_out_extent(h, kh, stride, pad, "H");
    const int64_t ow = conv_out_extent(w, kw, stride, pad, "W");
    const int64_t all = oh * ow;

    std::vector<int64_t> pos;
    if (positions) {
        for (int64_t p : *positions)
            if (p < 0 || p >= all)
                throw std::invalid_argument("im2col: position " + std::to_string(p) +
                                            " out of range [0," + std::to_string(all) + ")");
        pos = *positions;
    } else {
        pos.resize(static_cast<size_t>(all));
        for (int64_t p = 0; p < all; ++p) pos[static_cast<size_t>(p)] = p;
    }

    PatchMatrix pm;
    pm.rows = n * static_cast<int64_t>(pos.size());
    pm.cols = c_in * kh * kw;
    pm.data.assign(static_cast<size_t>(pm.rows * pm.cols), 0.0f);
    pm.provenance.sample_ids.reserve(static_cast<size_t>(pm.rows));
    pm.provenance.positions.reserve(static_cast<size_t>(pm.rows));

    int64_t r = 0;
    for (int64_t s = 0; s < n; ++s) {
        for (int64_t p : pos) {
            const int64_t oy = p / ow, ox = p % ow;
            float* row = pm.row(r);
            for (int64_t c = 0; c < c_in; ++c)
                for (int64_t ky = 0; ky < kh; ++ky)
                    for (int64_t kx = 0; kx < kw; ++kx) {
                        const int64_t iy = oy * stride + ky - pad;
                        const int64_t ix = ox * stride + kx - pad;
                        row[(c * kh + ky) * kw + kx] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                           ? input(s, c, iy, ix)
                                                           : 0.0f;
                    }
            pm.provenance.sample_ids.push_back(s);
            pm.provenance.positions.push_back(p);
            ++r;
        }
    }
    return pm;
}

namespace {

// Cholesky factorization in place (lower triangle). Returns false if a pivot
// is not safely positive.
bool cholesky(std::vector<double>& a, int64_t p) {
    double max_diag = 0.0;
    for (int64_t i = 0; i < p; ++i) max_diag = std::max(max_diag, a[static_cast<size_t>(i * p + i)]);
    const double tiny = std::max(max_diag, 1.0) * 1e-13;
    for (int64_t j = 0; j < p; ++j) {
        double d = a[static_cast<size_t>(j * p + j)];
        for (int64_t k = 0; k < j; ++k) {
            const double l = a[static_cast<size_t>(j * p + k)];
            d -= l * l;
        }
        if (d <= tiny) return false;
        const double dj = std::sqrt(d);
        a[static_cast<size_t>(j * p + j)] = dj;
        for (int64_t i = j + 1; i < p; ++i) {
            double v = a[static_cast<size_t>(i * p + j)];
            for (int64_t k = 0; k < j; ++k)
                v -= a[static_cast<size_t>(i * p + k)] * a[static_cast<size_t>(j * p + k)];
            a[static_cast<size_t>(i * p + j)] = v / dj;
        }
    }
    return true;
}

void cholesky_solve(const std::vector<double>& l, int64_t p, std::vector<double>& rhs, int64_t q) {
    // forward: L z = b
    for (int64_t i = 0; i < p; ++i) {
        for (int64_t k = 0; k < i; ++k) {
            const double lik = l[static_cast<size_t>(i * p + k)];
            for (int64_t c = 0; c < q; ++c)
                rhs[static_cast<size_t>(i * q + c)] -= lik * rhs[static_cast<size_t>(k * q + c)];
        }
        const double d = l[static_cast<size_t>(i * p + i)];
        for (int64_t c = 0; c < q; ++c) rhs[static_cast<size_t>(i * q + c)] /= d;
    }
    // backward: L^T w = z
    for (int64_t i = p - 1; i >= 0; --i) {
        for (int64_t k = i + 1; k < p; ++k) {
            const double lki = l[static_cast<size_t>(k * p + i)];
            for (int64_t c = 0; c < q; ++c)
                rhs[static_cast<size_t>(i * q + c)] -= lki * rhs[static_cast<size_t>(k * q + c)];
        }
        const double d = l[static_cast<size_t>(i * p + i)];
        for (int64_t c = 0; c < q; ++c) rhs[static_cast<size_t>(i * q + c)] /= d;
    }
}

}  // namespace

LeastSquaresResult least_squares(const Mat& x, const Mat& y, double ridge) {
    require(x.rows >= 1 && x.cols >= 1, "least_squares: X must be at least 1x1");
    require(y.rows == x.rows, "least_squares: X has " + std::to_string(x.rows) + " rows but Y has " +
                                  std::to_string(y.rows));
    require(ridge >= 0.0, "least_squares: ridge must be non-negative");
    const int64_t m = x.rows, p = x.cols, q = y.cols;

    // X^T X (upper triangle, mirrored) and X^T Y, double accumulation.
    std::vector<double> xtx(static_cast<size_t>(p * p), 0.0);
    for (int64_t r = 0; r < m; ++r) {
        const float* row = x.row(r);
        for (int64_t i = 0; i < p; ++i) {
            const double v = static_cast<double>(row[i]);
            if (v == 0.0) continue;
            double* out = xtx.data() + i * p;
            for (int64_t j = i; j < p; ++j) out[j] += v * static_cast<double>(row[j]);
        }
    }
    for (int64_t i = 0; i < p; ++i)
        for (int64_t j = 0; j < i; ++j)
            xtx[static_cast<size_t>(i * p + j)] = xtx[static_cast<size_t>(j * p + i)];

    std::vector<double> xty(static_cast<size_t>(p * q), 0.0);
    for (int64_t r = 0; r < m; ++r) {
        const float* xrow = x.row(r);
        const float* yrow = y.row(r);
        for (int64_t i = 0; i < p; ++i) {
            const double v = static_cast<double>(xrow[i]);
            if (v == 0.0) continue;
            double* out = xty.data() + i * q;
            for (int64_t j = 0; j < q; ++j) out[j] += v * static_cast<double>(yrow[j]);
        }
    }

    double trace = 0.0;
    for (int64_t i = 0; i < p; ++i) trace += xtx[static_cast<size_t>(i * p + i)];

    LeastSquaresResult res;
    res.underdetermined = m < p;

    auto factor_with = [&](double lambda, std::vector<double>& l) {
        l = xtx;
        for (int64_t i = 0; i < p; ++i) l[static_cast<size_t>(i * p + i)] += lambda;
        return cholesky(l, p);
    };

    std::vector<double> l;
    double lambda = ridge;
    if (!factor_with(lambda, l)) {
        lambda = 1e-6 * trace / static_cast<double>(p);
        res.ridge_fallback = true;
        if (trace == 0.0 || !factor_with(lambda, l)) {
            // X is numerically zero: every W has the same residual; pick W = 0.
            res.w = Mat(p, q, 0.0f);
            return res;
        }
    }

    std::vector<double> rhs = xty;
    cholesky_solve(l, p, rhs, q);
    res.w = Mat(p, q);
    for (int64_t i = 0; i < p * q; ++i)
        res.w.data[static_cast<size_t>(i)] = static_cast<float>(rhs[static_cast<size_t>(i)]);
    return res;
}

}  // namespace enprune
