#include "enprune/model_graph.hpp"

#include <cmath>
#include <stdexcept>

#include "enprune/rng.hpp"

namespace enprune {

namespace {

void init_kaiming_uniform(Tensor& w, int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w.data) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

LayerParams ModelGraph::layer_params(int64_t idx) const {
    const LayerSpec& s = layers.at(static_cast<size_t>(idx));
    LayerParams p;
    p.kind = s.kind;
    p.stride = s.stride;
    p.pad = s.pad;
    p.pool = s.pool;
    if (s.parameterized()) {
        p.weight = weights.at(static_cast<size_t>(idx));
        p.bias = biases.at(static_cast<size_t>(idx));
    }
    return p;
}

Tensor ModelGraph::forward(const Tensor& input) const {
    Tensor x = input;
    for (size_t i = 0; i < layers.size(); ++i)
        x = layer_forward(layer_params(static_cast<int64_t>(i)), x);
    return x;
}

Tensor ModelGraph::forward_collect(const Tensor& input,
                                   const std::function<void(int64_t, const Tensor&)>& sink) const {
    Tensor x = input;
    for (size_t i = 0; i < layers.size(); ++i) {
        x = layer_forward(layer_params(static_cast<int64_t>(i)), x);
        sink(static_cast<int64_t>(i), x);
    }
    return x;
}

std::vector<int64_t> ModelGraph::prunable_layers() const {
    std::vector<int64_t> out;
    for (size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::Conv) out.push_back(static_cast<int64_t>(i));
    return out;
}

int64_t ModelGraph::next_parameterized(int64_t idx) const {
    for (size_t i = static_cast<size_t>(idx) + 1; i < layers.size(); ++i)
        if (layers[i].parameterized()) return static_cast<int64_t>(i);
    return -1;
}

int64_t ModelGraph::conv_layer_count() const {
    int64_t n = 0;
    for (const auto& l : layers)
        if (l.kind == LayerKind::Conv) ++n;
    return n;
}

void ModelGraph::resolve() {
    if (layers.size() != weights.size() || layers.size() != biases.size())
        throw std::runtime_error("ModelGraph: layer/weight table size mismatch");
    int64_t c = input_c, h = input_h, w = input_w;
    bool flat = false;
    for (size_t i = 0; i < layers.size(); ++i) {
        LayerSpec& s = layers[i];
        s.in_h = h;
        s.in_w = w;
        switch (s.kind) {
            case LayerKind::Conv: {
                if (flat) throw std::runtime_error("ModelGraph: conv after flatten");
                const Tensor& wt = weights[i];
                if (wt.rank() != 4)
                    throw std::runtime_error("ModelGraph: conv layer " + std::to_string(i) +
                                             " weight must be rank 4");
                s.c_in = wt.dim(1);
                s.c_out = wt.dim(0);
                s.kh = wt.dim(2);
                s.kw = wt.dim(3);
                if (s.c_in != c)
                    throw std::runtime_error("ModelGraph: layer " + std::to_string(i) +
                                             " expects " + std::to_string(s.c_in) +
                                             " input channels, chain provides " +
                                             std::to_string(c));
                const int64_t span_h = h + 2 * s.pad - s.kh;
                const int64_t span_w = w + 2 * s.pad - s.kw;
                if (span_h < 0 || span_w < 0 || span_h % s.stride || span_w % s.stride)
                    throw std::runtime_error("ModelGraph: layer " + std::to_string(i) +
                                             " has non-integer output extent");
                h = span_h / s.stride + 1;
                w = span_w / s.stride + 1;
                c = s.c_out;
                break;
            }
            case LayerKind::Relu:
                s.c_in = s.c_out = c;
                break;
            case LayerKind::MaxPool:
            case LayerKind::AvgPool:
                if (flat) throw std::runtime_error("ModelGraph: pool after flatten");
                if (h % s.pool || w % s.pool)
                    throw std::runtime_error("ModelGraph: layer " + std::to_string(i) +
                                             " pool window does not divide spatial extent");
                s.c_in = s.c_out = c;
                h /= s.pool;
                w /= s.pool;
                break;
            case LayerKind::Flatten:
                if (flat) throw std::runtime_error("ModelGraph: repeated flatten");
                s.c_in = c;
                s.c_out = c * h * w;
                c = s.c_out;
                h = 1;
                w = 1;
                flat = true;
                break;
            case LayerKind::Linear: {
                if (!flat) throw std::runtime_error("ModelGraph: linear before flatten");
                const Tensor& wt = weights[i];
                if (wt.rank() != 2)
                    throw std::runtime_error("ModelGraph: linear layer " + std::to_string(i) +
                                             " weight must be rank 2");
                s.c_in = wt.dim(1);
                s.c_out = wt.dim(0);
                if (s.c_in != c)
                    throw std::runtime_error("ModelGraph: layer " + std::to_string(i) +
                                             " expects " + std::to_string(s.c_in) +
                                             " input features, chain provides " +
                                             std::to_string(c));
                c = s.c_out;
                break;
            }
        }
        s.out_h = h;
        s.out_w = w;
        s.id = static_cast<int64_t>(i);
    }
}

bool graphs_equal(const ModelGraph& a, const ModelGraph& b) {
    if (a.input_c != b.input_c || a.input_h != b.input_h || a.input_w != b.input_w) return false;
    if (a.layers.size() != b.layers.size()) return false;
    for (size_t i = 0; i < a.layers.size(); ++i) {
        const LayerSpec &la = a.layers[i], &lb = b.layers[i];
        if (la.kind != lb.kind || la.c_in != lb.c_in || la.c_out != lb.c_out || la.kh != lb.kh ||
            la.kw != lb.kw || la.stride != lb.stride || la.pad != lb.pad || la.pool != lb.pool)
            return false;
        if (a.weights[i].shape != b.weights[i].shape || a.weights[i].data != b.weights[i].data)
            return false;
        if (a.biases[i].shape != b.biases[i].shape || a.biases[i].data != b.biases[i].data)
            return false;
    }
    return true;
}

ModelGraph build_chain(const std::vector<ChainItem>& items, int64_t in_c, int64_t in_h,
                       int64_t in_w, uint64_t init_seed) {
    Rng rng(init_seed);
    ModelGraph g;
    g.input_c = in_c;
    g.input_h = in_h;
    g.input_w = in_w;

    int64_t c = in_c, h = in_h, w = in_w;
    bool flat = false;
    for (const ChainItem& it : items) {
        LayerSpec s;
        s.kind = it.kind;
        Tensor weight, bias;
        switch (it.kind) {
            case LayerKind::Conv: {
                s.kh = s.kw = 3;
                s.stride = 1;
                s.pad = 1;
                weight = Tensor({it.arg, c, 3, 3});
                bias = Tensor({it.arg});
                init_kaiming_uniform(weight, c * 9, rng);
                c = it.arg;
                break;
            }
            case LayerKind::MaxPool:
            case LayerKind::AvgPool:
                s.pool = 2;
                h /= 2;
                w /= 2;
                break;
            case LayerKind::Flatten:
                c = c * h * w;
                h = w = 1;
                flat = true;
                break;
            case LayerKind::Linear: {
                if (!flat) throw std::invalid_argument("build_chain: linear before flatten");
                weight = Tensor({it.arg, c});
                bias = Tensor({it.arg});
                init_kaiming_uniform(weight, c, rng);
                c = it.arg;
                break;
            }
            case LayerKind::Relu: break;
        }
        g.layers.push_back(s);
        g.weights.push_back(std::move(weight));
        g.biases.push_back(std::move(bias));
    }
    g.resolve();
    return g;
}

ModelGraph build_preset(const std::string& name, int64_t in_c, int64_t in_h, int64_t in_w,
                        uint64_t init_seed) {
    using K = LayerKind;
    std::vector<ChainItem> items;
    auto conv = [&](int64_t ch) {
        items.push_back({K::Conv, ch});
        items.push_back({K::Relu, 0});
    };
    auto pool = [&] { items.push_back({K::MaxPool, 0}); };

    if (name == "tinyvgg6") {
        conv(16);
        conv(32);
        pool();
        conv(64);
        conv(64);
        pool();
        conv(128);
        conv(128);
        pool();
        items.push_back({K::Flatten, 0});
        items.push_back({K::Linear, 10});
    } else if (name == "vgg16") {
        // standard 13-conv configuration, single classifier linear
        conv(64);
        conv(64);
        pool();
        conv(128);
        conv(128);
        pool();
        conv(256);
        conv(256);
        conv(256);
        pool();
        conv(512);
        conv(512);
        conv(512);
        pool();
        conv(512);
        conv(512);
        conv(512);
        pool();
        items.push_back({K::Flatten, 0});
        items.push_back({K::Linear, 10});
    } else {
        throw std::invalid_argument("build_preset: unknown preset '" + name +
                                    "' (expected tinyvgg6 or vgg16)");
    }
    return build_chain(items, in_c, in_h, in_w, init_seed);
}

ModelGraph fresh_init_like(const ModelGraph& g, uint64_t init_seed) {
    Rng rng(init_seed);
    ModelGraph out = g;
    for (size_t i = 0; i < out.layers.size(); ++i) {
        const LayerSpec& s = out.layers[i];
        if (s.kind == LayerKind::Conv) {
            init_kaiming_uniform(out.weights[i], s.c_in * s.kh * s.kw, rng);
            out.biases[i] = Tensor({s.c_out});
        } else if (s.kind == LayerKind::Linear) {
            init_kaiming_uniform(out.weights[i], s.c_in, rng);
            out.biases[i] = Tensor({s.c_out});
        }
    }
    return out;
}

int64_t count_flops(const LayerSpec& spec) {
    switch (spec.kind) {
        case LayerKind::Conv:
            return 2 * spec.kh * spec.kw * spec.c_in * spec.c_out * spec.out_h * spec.out_w;
        case LayerKind::Linear: return 2 * spec.c_in * spec.c_out;
        default: return 0;
    }
}

int64_t total_flops(const ModelGraph& g) {
    int64_t total = 0;
    for (const auto& l : g.layers) total += count_flops(l);
    return total;
}

int64_t parameter_count(const ModelGraph& g) {
    int64_t n = 0;
    for (size_t i = 0; i < g.layers.size(); ++i) n += g.weights[i].size() + g.biases[i].size();
    return n;
}

FlopsReport flops_report(const ModelGraph& pruned, const ModelGraph& original) {
    FlopsReport r;
    for (const auto& l : pruned.layers) r.per_layer.push_back(count_flops(l));
    for (int64_t f : r.per_layer) r.total += f;
    const int64_t ref = total_flops(original);
    if (ref == 0) throw std::invalid_argument("flops_report: reference graph has zero FLOPS");
    r.ratio = static_cast<double>(r.total) / static_cast<double>(ref);
    return r;
}

double preserved_ratio(const ModelGraph& pruned, const ModelGraph& original) {
    return flops_report(pruned, original).ratio;
}

ModelGraph remove_output_channels(const ModelGraph& g, int64_t layer_index,
                                  const std::vector<int64_t>& kept) {
    const LayerSpec& spec = g.layers.at(static_cast<size_t>(layer_index));
    if (spec.kind != LayerKind::Conv)
        throw std::invalid_argument("remove_output_channels: layer " +
                                    std::to_string(layer_index) + " is not a conv layer");
    if (kept.empty())
        throw std::invalid_argument(
            "remove_output_channels: kept set is empty (at least one filter per layer)");
    for (size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] < 0 || kept[i] >= spec.c_out)
            throw std::invalid_argument("remove_output_channels: kept index out of range");
        if (i > 0 && kept[i] <= kept[i - 1])
            throw std::invalid_argument("remove_output_channels: kept indices must be sorted and unique");
    }

    ModelGraph out = g;
    const Tensor& w = g.weights[static_cast<size_t>(layer_index)];
    const Tensor& b = g.biases[static_cast<size_t>(layer_index)];
    const int64_t kdim = spec.c_in * spec.kh * spec.kw;
    const int64_t n_kept = static_cast<int64_t>(kept.size());

    Tensor new_w({n_kept, spec.c_in, spec.kh, spec.kw});
    Tensor new_b({n_kept});
    for (int64_t r = 0; r < n_kept; ++r) {
        const int64_t src = kept[static_cast<size_t>(r)];
        std::copy_n(w.data.begin() + src * kdim, kdim, new_w.data.begin() + r * kdim);
        new_b(r) = b(src);
    }
    out.weights[static_cast<size_t>(layer_index)] = std::move(new_w);
    out.biases[static_cast<size_t>(layer_index)] = std::move(new_b);

    const int64_t succ = g.next_parameterized(layer_index);
    if (succ >= 0) {
        const LayerSpec& sspec = g.layers[static_cast<size_t>(succ)];
        const Tensor& sw = g.weights[static_cast<size_t>(succ)];
        if (sspec.kind == LayerKind::Conv) {
            Tensor nw({sspec.c_out, n_kept, sspec.kh, sspec.kw});
            const int64_t area = sspec.kh * sspec.kw;
            for (int64_t oc = 0; oc < sspec.c_out; ++oc)
                for (int64_t r = 0; r < n_kept; ++r)
                    std::copy_n(sw.data.begin() + (oc * sspec.c_in + kept[static_cast<size_t>(r)]) * area,
                                area, nw.data.begin() + (oc * n_kept + r) * area);
            out.weights[static_cast<size_t>(succ)] = std::move(nw);
        } else {
            // linear after flatten: one column block of out_h*out_w per channel
            int64_t flat_idx = -1;
            for (int64_t i = layer_index + 1; i < succ; ++i)
                if (g.layers[static_cast<size_t>(i)].kind == LayerKind::Flatten) flat_idx = i;
            if (flat_idx < 0)
                throw std::runtime_error(
                    "remove_output_channels: linear successor without flatten in between");
            const LayerSpec& fspec = g.layers[static_cast<size_t>(flat_idx)];
            const int64_t block = fspec.in_h * fspec.in_w;
            Tensor nw({sspec.c_out, n_kept * block});
            for (int64_t o = 0; o < sspec.c_out; ++o)
                for (int64_t r = 0; r < n_kept; ++r)
                    std::copy_n(sw.data.begin() + o * sspec.c_in + kept[static_cast<size_t>(r)] * block,
                                block, nw.data.begin() + o * (n_kept * block) + r * block);
            out.weights[static_cast<size_t>(succ)] = std::move(nw);
        }
    }
    out.resolve();
    return out;
}

}  // namespace enprune
