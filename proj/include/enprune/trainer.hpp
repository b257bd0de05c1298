#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enprune/dataset.hpp"
#include "enprune/model_graph.hpp"
#include "enprune/pruner.hpp"

namespace enprune {

struct TrainConfig {
    int64_t epochs = 20;
    double lr0 = 0.01;
    double momentum = 0.9;
    int64_t batch_size = 64;
    uint64_t seed = 1;
    bool augment = true;  // random horizontal flip + 4-pixel pad-and-crop
};

// lr0 * 0.5 * (1 + cos(pi * t / total)), stepped per epoch, no restarts.
double cosine_lr(int64_t t, int64_t total, double lr0);

struct EpochStats {
    int64_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct TrainResult {
    ModelGraph graph;
    std::vector<EpochStats> history;
};

// History CSV: epoch,lr,train_loss,train_acc,test_acc
void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

// Momentum SGD with softmax cross-entropy; deterministic per seed. Throws on
// divergence (non-finite loss).
TrainResult train(const ModelGraph& start, const Dataset& train_split, const Dataset& test_split,
                  const TrainConfig& cfg);

// Same loop, starting from already-reconstructed weights.
TrainResult fine_tune(const ModelGraph& pruned, const Dataset& train_split,
                      const Dataset& test_split, const TrainConfig& cfg);

// Builds the plan's pruned architecture with fresh random weights (no
// reconstruction) and trains it fully.
TrainResult train_from_scratch(const SparsityPlan& plan, const ModelGraph& original,
                               const Dataset& train_split, const Dataset& test_split,
                               const TrainConfig& cfg);

// Architecture with the plan's kept-filter counts and fresh initialization.
ModelGraph pruned_architecture(const SparsityPlan& plan, const ModelGraph& original,
                               uint64_t init_seed);

double evaluate(const ModelGraph& g, const Dataset& split);

// Mean softmax cross-entropy of logits against labels (test/diagnostic use).
double cross_entropy(const Tensor& logits, const int32_t* labels, int64_t n);

}  // namespace enprune
