#include "enprune/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace enprune {

std::vector<int64_t> rank_filters_l2(const Tensor& weight) {
    if (weight.rank() < 1 || weight.dim(0) < 1)
        throw std::invalid_argument("rank_filters_l2: weight must hold at least one filter");
    const int64_t n = weight.dim(0);
    const int64_t per = weight.size() / n;
    std::vector<double> norms(static_cast<size_t>(n), 0.0);
    for (int64_t f = 0; f < n; ++f) {
        double s = 0.0;
        for (int64_t i = 0; i < per; ++i) {
            const double v = weight.data[static_cast<size_t>(f * per + i)];
            s += v * v;
        }
        norms[static_cast<size_t>(f)] = s;
    }
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return norms[static_cast<size_t>(a)] < norms[static_cast<size_t>(b)];
    });
    return order;
}

int64_t select_kept(int64_t n_filters, double sparsity) {
    if (n_filters < 1) throw std::invalid_argument("select_kept: no filters");
    if (sparsity < 0.0 || sparsity >= 1.0)
        throw std::invalid_argument("select_kept: sparsity must be in [0,1)");
    // ceil((1-a)*n) == n - floor(a*n); the epsilon guards exact products
    const int64_t dropped =
        static_cast<int64_t>(std::floor(sparsity * static_cast<double>(n_filters) + 1e-9));
    return std::clamp<int64_t>(n_filters - dropped, 1, n_filters);
}

std::vector<int64_t> kept_filter_indices(const Tensor& weight, double sparsity) {
    const std::vector<int64_t> order = rank_filters_l2(weight);
    const int64_t keep = select_kept(weight.dim(0), sparsity);
    std::vector<int64_t> kept(order.end() - keep, order.end());
    std::sort(kept.begin(), kept.end());
    return kept;
}

void save_plan(const SparsityPlan& plan, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_plan: cannot open '" + path + "'");
    char line[64];
    for (const auto& [id, a] : plan.entries) {
        std::snprintf(line, sizeof(line), "%lld\t%.6f\n", static_cast<long long>(id), a);
        os << line;
    }
}

SparsityPlan load_plan(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_plan: cannot open '" + path + "'");
    SparsityPlan plan;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        long long id = 0;
        double a = 0.0;
        if (std::sscanf(line.c_str(), "%lld\t%lf", &id, &a) != 2)
            throw std::runtime_error("load_plan: malformed line " + std::to_string(lineno) +
                                     " in '" + path + "'");
        plan.entries.emplace_back(id, a);
    }
    return plan;
}

const CalibrationEntry& CalibrationCache::entry_for(int64_t layer_index) const {
    for (const auto& e : entries)
        if (e.layer_index == layer_index) return e;
    throw std::invalid_argument("calibration cache has no entry for layer " +
                                std::to_string(layer_index));
}

CalibrationCache build_calibration_cache(const ModelGraph& g, const Tensor& samples,
                                         int64_t positions_per_sample, Rng& rng) {
    if (samples.rank() != 4 || samples.dim(0) < 1)
        throw std::invalid_argument("calibration: samples must be a nonempty N,C,H,W batch");
    if (positions_per_sample < 1)
        throw std::invalid_argument("calibration: positions_per_sample must be >= 1");

    CalibrationCache cache;
    cache.sample_count = samples.dim(0);
    cache.positions_per_sample = positions_per_sample;

    const int64_t n = samples.dim(0);
    bool linear_cached = false;
    Tensor x = samples;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& spec = g.layers[i];
        const Tensor out = layer_forward(g.layer_params(static_cast<int64_t>(i)), x);

        if (spec.kind == LayerKind::Conv) {
            CalibrationEntry e;
            e.layer_index = static_cast<int64_t>(i);
            e.kind = LayerKind::Conv;
            e.channels = spec.c_in;
            e.cols_per_channel = spec.kh * spec.kw;
            const int64_t grid = spec.out_h * spec.out_w;
            const int64_t npos = std::min(positions_per_sample, grid);

            e.patches.rows = n * npos;
            e.patches.cols = spec.c_in * spec.kh * spec.kw;
            e.patches.data.reserve(static_cast<size_t>(e.patches.rows * e.patches.cols));
            e.patches.provenance.layer_id = static_cast<int64_t>(i);
            e.outputs = Mat(n * npos, spec.c_out);

            Tensor one_sample({1, spec.c_in, spec.in_h, spec.in_w});
            int64_t row = 0;
            for (int64_t s = 0; s < n; ++s) {
                const std::vector<int64_t> pos = rng.sample_indices(grid, npos);
                std::copy_n(x.data.begin() + s * spec.c_in * spec.in_h * spec.in_w,
                            one_sample.size(), one_sample.data.begin());
                const PatchMatrix pm =
                    im2col(one_sample, spec.kh, spec.kw, spec.stride, spec.pad, &pos);
                e.patches.data.insert(e.patches.data.end(), pm.data.begin(), pm.data.end());
                for (int64_t p = 0; p < npos; ++p, ++row) {
                    e.patches.provenance.sample_ids.push_back(s);
                    e.patches.provenance.positions.push_back(pos[static_cast<size_t>(p)]);
                    for (int64_t oc = 0; oc < spec.c_out; ++oc)
                        e.outputs.at(row, oc) =
                            out.data[static_cast<size_t>((s * spec.c_out + oc) * grid +
                                                         pos[static_cast<size_t>(p)])];
                }
            }
            cache.entries.push_back(std::move(e));
        } else if (spec.kind == LayerKind::Linear && !linear_cached) {
            // first linear after flatten: whole input vectors, one row per sample
            CalibrationEntry e;
            e.layer_index = static_cast<int64_t>(i);
            e.kind = LayerKind::Linear;
            int64_t flat_block = 1;
            for (size_t j = 0; j < i; ++j)
                if (g.layers[j].kind == LayerKind::Flatten)
                    flat_block = g.layers[j].in_h * g.layers[j].in_w;
            e.cols_per_channel = flat_block;
            e.channels = spec.c_in / flat_block;
            e.patches.rows = n;
            e.patches.cols = spec.c_in;
            e.patches.data = x.data;
            e.patches.provenance.layer_id = static_cast<int64_t>(i);
            for (int64_t s = 0; s < n; ++s) {
                e.patches.provenance.sample_ids.push_back(s);
                e.patches.provenance.positions.push_back(0);
            }
            e.outputs = Mat(n, spec.c_out);
            e.outputs.data = out.data;
            cache.entries.push_back(std::move(e));
            linear_cached = true;
        }
        x = out;
    }
    return cache;
}

namespace {

// X restricted to kept input-channel blocks, with an all-ones bias column.
Mat gather_design(const CalibrationEntry& entry, const std::vector<int64_t>& kept_in) {
    const int64_t block = entry.cols_per_channel;
    const int64_t kc = static_cast<int64_t>(kept_in.size());
    Mat x(entry.patches.rows, kc * block + 1);
    for (int64_t r = 0; r < x.rows; ++r) {
        const float* src = entry.patches.row(r);
        float* dst = x.row(r);
        for (int64_t c = 0; c < kc; ++c)
            std::copy_n(src + kept_in[static_cast<size_t>(c)] * block, block, dst + c * block);
        dst[kc * block] = 1.0f;
    }
    return x;
}

Mat gather_targets(const CalibrationEntry& entry, const std::vector<int64_t>& kept_out) {
    Mat y(entry.outputs.rows, static_cast<int64_t>(kept_out.size()));
    for (int64_t r = 0; r < y.rows; ++r) {
        const float* src = entry.outputs.row(r);
        float* dst = y.row(r);
        for (size_t c = 0; c < kept_out.size(); ++c) dst[c] = src[kept_out[c]];
    }
    return y;
}

}  // namespace

ReconstructedLayer reconstruct_layer(const CalibrationEntry& entry,
                                     const std::vector<int64_t>& kept_in,
                                     const std::vector<int64_t>& kept_out, double ridge) {
    if (kept_in.empty() || kept_out.empty())
        throw std::invalid_argument("reconstruct_layer: kept sets must be nonempty");
    const Mat x = gather_design(entry, kept_in);
    const Mat y = gather_targets(entry, kept_out);
    const LeastSquaresResult ls = least_squares(x, y, ridge);

    const int64_t block = entry.cols_per_channel;
    const int64_t kc = static_cast<int64_t>(kept_in.size());
    const int64_t ko = static_cast<int64_t>(kept_out.size());

    ReconstructedLayer out;
    out.underdetermined = ls.underdetermined;
    out.ridge_fallback = ls.ridge_fallback;
    out.weight = Tensor({ko, kc * block});
    out.bias = Tensor({ko});
    for (int64_t o = 0; o < ko; ++o) {
        for (int64_t k = 0; k < kc * block; ++k)
            out.weight.data[static_cast<size_t>(o * kc * block + k)] = ls.w.at(k, o);
        out.bias(o) = ls.w.at(kc * block, o);
    }
    return out;
}

double calibration_residual(const CalibrationEntry& entry, const std::vector<int64_t>& kept_in,
                            const std::vector<int64_t>& kept_out, const Tensor& weight,
                            const Tensor& bias) {
    const Mat x = gather_design(entry, kept_in);
    const Mat y = gather_targets(entry, kept_out);
    const int64_t p = x.cols;
    double total = 0.0;
    for (int64_t r = 0; r < x.rows; ++r) {
        const float* xr = x.row(r);
        for (int64_t o = 0; o < y.cols; ++o) {
            double pred = static_cast<double>(bias(o));
            for (int64_t k = 0; k < p - 1; ++k)
                pred += static_cast<double>(xr[k]) *
                        static_cast<double>(weight.data[static_cast<size_t>(o * (p - 1) + k)]);
            const double d = pred - static_cast<double>(y.at(r, o));
            total += d * d;
        }
    }
    return total;
}

ModelGraph prune_network(const ModelGraph& g, const SparsityPlan& plan,
                         const CalibrationCache& cache, double ridge) {
    const std::vector<int64_t> prunable = g.prunable_layers();
    if (plan.entries.size() != prunable.size())
        throw std::invalid_argument("prune_network: plan covers " +
                                    std::to_string(plan.entries.size()) + " layers, graph has " +
                                    std::to_string(prunable.size()) + " prunable layers");
    for (size_t i = 0; i < prunable.size(); ++i)
        if (plan.entries[i].first != prunable[i])
            throw std::invalid_argument("prune_network: plan layer ids do not match the graph");

    ModelGraph cur = g;
    for (size_t i = 0; i < prunable.size(); ++i) {
        const int64_t t = prunable[i];
        const double a = plan.entries[i].second;
        const int64_t n_filters = cur.weights[static_cast<size_t>(t)].dim(0);
        const std::vector<int64_t> kept =
            kept_filter_indices(cur.weights[static_cast<size_t>(t)], a);
        if (static_cast<int64_t>(kept.size()) == n_filters) continue;  // successor unaffected
        cur = remove_output_channels(cur, t, kept);

        const int64_t succ = cur.next_parameterized(t);
        if (succ < 0) continue;
        const CalibrationEntry& entry = cache.entry_for(succ);
        std::vector<int64_t> all_out(static_cast<size_t>(entry.outputs.cols));
        for (size_t o = 0; o < all_out.size(); ++o) all_out[o] = static_cast<int64_t>(o);
        ReconstructedLayer rec = reconstruct_layer(entry, kept, all_out, ridge);

        const LayerSpec& sspec = cur.layers[static_cast<size_t>(succ)];
        if (sspec.kind == LayerKind::Conv)
            rec.weight.shape = {sspec.c_out, static_cast<int64_t>(kept.size()), sspec.kh,
                                sspec.kw};
        cur.weights[static_cast<size_t>(succ)] = std::move(rec.weight);
        cur.biases[static_cast<size_t>(succ)] = std::move(rec.bias);
        cur.resolve();
    }
    return cur;
}

}  // namespace enprune
