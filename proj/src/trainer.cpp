#include "enprune/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "enprune/rng.hpp"

namespace enprune {

double cosine_lr(int64_t t, int64_t total, double lr0) {
    if (total <= 0) throw std::invalid_argument("cosine_lr: total steps must be positive");
    if (t < 0 || t > total) throw std::invalid_argument("cosine_lr: step out of range");
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(t) / static_cast<double>(total)));
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_history_csv: cannot open '" + path + "'");
    os << "epoch,lr,train_loss,train_acc,test_acc\n";
    char line[160];
    for (const auto& e : history) {
        std::snprintf(line, sizeof(line), "%lld,%.6f,%.6f,%.6f,%.6f\n",
                      static_cast<long long>(e.epoch), e.lr, e.train_loss, e.train_acc,
                      e.test_acc);
        os << line;
    }
}

double cross_entropy(const Tensor& logits, const int32_t* labels, int64_t n) {
    const int64_t k = logits.dim(1);
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const float* row = logits.data.data() + i * k;
        double m = row[0];
        for (int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
        double z = 0.0;
        for (int64_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - m);
        total += -(static_cast<double>(row[labels[i]]) - m - std::log(z));
    }
    return total / static_cast<double>(n);
}

namespace {

constexpr int64_t kEvalBatch = 200;

int64_t argmax_row(const float* row, int64_t k) {
    int64_t best = 0;
    for (int64_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

// flip + pad-4-crop into dst; draws exactly three values from rng.
void augment_sample(const float* src, float* dst, Rng& rng) {
    const bool flip = rng.uniform() < 0.5;
    const int64_t dy = rng.uniform_int(9) - 4;
    const int64_t dx = rng.uniform_int(9) - 4;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < 32; ++y)
            for (int64_t x = 0; x < 32; ++x) {
                const int64_t sy = y + dy;
                const int64_t sx0 = x + dx;
                const int64_t sx = flip ? 31 - sx0 : sx0;
                float v = 0.0f;
                if (sy >= 0 && sy < 32 && sx0 >= 0 && sx0 < 32)
                    v = src[(c * 32 + sy) * 32 + sx];
                dst[(c * 32 + y) * 32 + x] = v;
            }
}

struct Sgd {
    std::vector<Tensor> vel_w, vel_b;
    void init(const ModelGraph& g) {
        vel_w.resize(g.layers.size());
        vel_b.resize(g.layers.size());
        for (size_t i = 0; i < g.layers.size(); ++i) {
            if (!g.layers[i].parameterized()) continue;
            vel_w[i] = Tensor(g.weights[i].shape);
            vel_b[i] = Tensor(g.biases[i].shape);
        }
    }
    void step(ModelGraph& g, size_t i, const Tensor& gw, const Tensor& gb, double lr,
              double momentum) {
        auto apply = [&](Tensor& vel, Tensor& param, const Tensor& grad) {
            const float m = static_cast<float>(momentum);
            const float l = static_cast<float>(lr);
            for (size_t j = 0; j < param.data.size(); ++j) {
                vel.data[j] = m * vel.data[j] + grad.data[j];
                param.data[j] -= l * vel.data[j];
            }
        };
        apply(vel_w[i], g.weights[i], gw);
        apply(vel_b[i], g.biases[i], gb);
    }
};

}  // namespace

double evaluate(const ModelGraph& g, const Dataset& split) {
    if (split.empty()) throw std::invalid_argument("evaluate: empty split");
    const int64_t n = split.size();
    const int64_t stride = 3 * 32 * 32;
    int64_t correct = 0;
    for (int64_t start = 0; start < n; start += kEvalBatch) {
        const int64_t b = std::min(kEvalBatch, n - start);
        Tensor batch({b, 3, 32, 32});
        std::copy_n(split.images.data.begin() + start * stride, b * stride, batch.data.begin());
        const Tensor logits = g.forward(batch);
        const int64_t k = logits.dim(1);
        for (int64_t i = 0; i < b; ++i)
            if (argmax_row(logits.data.data() + i * k, k) == split.labels[static_cast<size_t>(start + i)])
                ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

TrainResult train(const ModelGraph& start, const Dataset& train_split, const Dataset& test_split,
                  const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw std::invalid_argument("train: negative epoch count");
    if (train_split.empty() || test_split.empty())
        throw std::invalid_argument("train: dataset must provide train and test splits");

    TrainResult res;
    res.graph = start;
    ModelGraph& g = res.graph;
    Sgd opt;
    opt.init(g);
    Rng rng(cfg.seed);

    const int64_t n = train_split.size();
    const int64_t stride = 3 * 32 * 32;
    const int64_t n_layers = static_cast<int64_t>(g.layers.size());

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr0);
        const std::vector<int64_t> order = rng.permutation(n);
        double loss_sum = 0.0;
        int64_t correct = 0;

        for (int64_t bstart = 0; bstart < n; bstart += cfg.batch_size) {
            const int64_t b = std::min(cfg.batch_size, n - bstart);
            Tensor batch({b, 3, 32, 32});
            std::vector<int32_t> labels(static_cast<size_t>(b));
            for (int64_t i = 0; i < b; ++i) {
                const int64_t src = order[static_cast<size_t>(bstart + i)];
                const float* img = train_split.images.data.data() + src * stride;
                if (cfg.augment)
                    augment_sample(img, batch.data.data() + i * stride, rng);
                else
                    std::copy_n(img, stride, batch.data.begin() + i * stride);
                labels[static_cast<size_t>(i)] = train_split.labels[static_cast<size_t>(src)];
            }

            // forward, caching every layer input
            std::vector<Tensor> inputs(static_cast<size_t>(n_layers));
            Tensor x = batch;
            for (int64_t l = 0; l < n_layers; ++l) {
                inputs[static_cast<size_t>(l)] = x;
                x = layer_forward(g.layer_params(l), x);
            }
            const Tensor& logits = x;
            const int64_t k = logits.dim(1);

            // softmax cross-entropy and its gradient
            Tensor dlogits({b, k});
            double batch_loss = 0.0;
            for (int64_t i = 0; i < b; ++i) {
                const float* row = logits.data.data() + i * k;
                double m = row[0];
                for (int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
                double z = 0.0;
                for (int64_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - m);
                const int32_t y = labels[static_cast<size_t>(i)];
                batch_loss += -(static_cast<double>(row[y]) - m - std::log(z));
                for (int64_t j = 0; j < k; ++j) {
                    const double p = std::exp(static_cast<double>(row[j]) - m) / z;
                    dlogits(i, j) = static_cast<float>((p - (j == y ? 1.0 : 0.0)) /
                                                       static_cast<double>(b));
                }
                if (argmax_row(row, k) == y) ++correct;
            }
            batch_loss /= static_cast<double>(b);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                                         std::to_string(epoch) + ", batch offset " +
                                         std::to_string(bstart));
            loss_sum += batch_loss * static_cast<double>(b);

            // backward + parameter update
            Tensor grad = dlogits;
            for (int64_t l = n_layers - 1; l >= 0; --l) {
                const LayerGrads lg =
                    layer_backward(g.layer_params(l), inputs[static_cast<size_t>(l)], grad);
                if (g.layers[static_cast<size_t>(l)].parameterized())
                    opt.step(g, static_cast<size_t>(l), lg.weight_grad, lg.bias_grad, lr,
                             cfg.momentum);
                grad = lg.input_grad;
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        stats.test_acc = evaluate(g, test_split);
        res.history.push_back(stats);
    }
    return res;
}

TrainResult fine_tune(const ModelGraph& pruned, const Dataset& train_split,
                      const Dataset& test_split, const TrainConfig& cfg) {
    return train(pruned, train_split, test_split, cfg);
}

ModelGraph pruned_architecture(const SparsityPlan& plan, const ModelGraph& original,
                               uint64_t init_seed) {
    const std::vector<int64_t> prunable = original.prunable_layers();
    if (plan.entries.size() != prunable.size())
        throw std::invalid_argument("pruned_architecture: plan does not cover the prunable layers");
    ModelGraph cur = original;
    for (size_t i = 0; i < prunable.size(); ++i) {
        const int64_t t = prunable[i];
        const int64_t n = cur.weights[static_cast<size_t>(t)].dim(0);
        const int64_t keep = select_kept(n, plan.entries[i].second);
        if (keep == n) continue;
        std::vector<int64_t> kept(static_cast<size_t>(keep));
        for (int64_t j = 0; j < keep; ++j) kept[static_cast<size_t>(j)] = j;
        cur = remove_output_channels(cur, t, kept);
    }
    return fresh_init_like(cur, init_seed);
}

TrainResult train_from_scratch(const SparsityPlan& plan, const ModelGraph& original,
                               const Dataset& train_split, const Dataset& test_split,
                               const TrainConfig& cfg) {
    const ModelGraph fresh = pruned_architecture(plan, original, cfg.seed);
    return train(fresh, train_split, test_split, cfg);
}

}  // namespace enprune
