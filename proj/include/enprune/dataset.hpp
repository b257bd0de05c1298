#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "enprune/tensor.hpp"

namespace enprune {

struct Dataset {
    Tensor images;               // N,3,32,32
    std::vector<int32_t> labels;  // N values in [0,10)

    int64_t size() const { return static_cast<int64_t>(labels.size()); }
    bool empty() const { return labels.empty(); }
};

struct ChannelStats {
    std::array<double, 3> mean{};
    std::array<double, 3> stdev{};
};

// CIFAR-10 binary batch files: records of 3073 bytes (1 label byte, then
// 1024 R + 1024 G + 1024 B bytes, row-major 32x32). Pixels are scaled to
// [0,1]; standardization is applied separately so its constants can be
// recorded in the run manifest.
Dataset load_cifar10(const std::vector<std::string>& paths);

ChannelStats compute_channel_stats(const Dataset& d);
void standardize(Dataset& d, const ChannelStats& stats);

Dataset gather(const Dataset& d, const std::vector<int64_t>& indices);

struct SplitSizes {
    int64_t train = 0;
    int64_t test = 0;
    int64_t mini_val = 0;     // held out from the train pool, disjoint from train
    int64_t calibration = 0;  // drawn from the train split
};

struct SplitDataset {
    Dataset train, test, mini_val, calibration;
};

// Seeded sampling: train and mini-val are disjoint subsets of the train pool;
// calibration is a subset of train; test comes from the test pool.
SplitDataset subset(const Dataset& train_pool, const Dataset& test_pool, const SplitSizes& sizes,
                    uint64_t seed);

}  // namespace enprune
