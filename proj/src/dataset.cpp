#include "enprune/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "enprune/rng.hpp"

namespace enprune {

namespace {
constexpr int64_t kRecordBytes = 3073;
constexpr int64_t kPixels = 1024;
}  // namespace

Dataset load_cifar10(const std::vector<std::string>& paths) {
    if (paths.empty()) throw std::invalid_argument("load_cifar10: no batch files given");

    std::vector<std::vector<char>> files;
    int64_t total = 0;
    for (const auto& path : paths) {
        std::ifstream is(path, std::ios::binary | std::ios::ate);
        if (!is) throw std::runtime_error("load_cifar10: cannot open '" + path + "'");
        const int64_t len = static_cast<int64_t>(is.tellg());
        if (len % kRecordBytes != 0)
            throw std::runtime_error("load_cifar10: '" + path + "' has " + std::to_string(len) +
                                     " bytes, not a multiple of 3073 (truncated after offset " +
                                     std::to_string((len / kRecordBytes) * kRecordBytes) + ")");
        is.seekg(0);
        std::vector<char> bytes(static_cast<size_t>(len));
        is.read(bytes.data(), len);
        if (is.gcount() != len) throw std::runtime_error("load_cifar10: short read on '" + path + "'");
        total += len / kRecordBytes;
        files.push_back(std::move(bytes));
    }

    Dataset d;
    d.images = Tensor({total, 3, 32, 32});
    d.labels.resize(static_cast<size_t>(total));
    int64_t n = 0;
    for (size_t f = 0; f < files.size(); ++f) {
        const auto& bytes = files[f];
        const int64_t records = static_cast<int64_t>(bytes.size()) / kRecordBytes;
        for (int64_t r = 0; r < records; ++r, ++n) {
            const unsigned char* rec =
                reinterpret_cast<const unsigned char*>(bytes.data()) + r * kRecordBytes;
            if (rec[0] >= 10)
                throw std::runtime_error("load_cifar10: '" + paths[f] + "' has label " +
                                         std::to_string(static_cast<int>(rec[0])) +
                                         " at byte offset " + std::to_string(r * kRecordBytes));
            d.labels[static_cast<size_t>(n)] = rec[0];
            float* img = d.images.data.data() + n * 3 * kPixels;
            for (int64_t c = 0; c < 3; ++c)
                for (int64_t p = 0; p < kPixels; ++p)
                    img[c * kPixels + p] =
                        static_cast<float>(rec[1 + c * kPixels + p]) / 255.0f;
        }
    }
    return d;
}

ChannelStats compute_channel_stats(const Dataset& d) {
    if (d.empty()) throw std::invalid_argument("compute_channel_stats: empty dataset");
    ChannelStats s;
    const int64_t n = d.size();
    for (int64_t c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const float* img = d.images.data.data() + (i * 3 + c) * kPixels;
            for (int64_t p = 0; p < kPixels; ++p) {
                sum += img[p];
                sq += static_cast<double>(img[p]) * img[p];
            }
        }
        const double count = static_cast<double>(n * kPixels);
        s.mean[static_cast<size_t>(c)] = sum / count;
        const double var = sq / count - s.mean[static_cast<size_t>(c)] * s.mean[static_cast<size_t>(c)];
        s.stdev[static_cast<size_t>(c)] = std::sqrt(std::max(var, 1e-12));
    }
    return s;
}

void standardize(Dataset& d, const ChannelStats& stats) {
    const int64_t n = d.size();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < 3; ++c) {
            float* img = d.images.data.data() + (i * 3 + c) * kPixels;
            const float mean = static_cast<float>(stats.mean[static_cast<size_t>(c)]);
            const float inv = static_cast<float>(1.0 / stats.stdev[static_cast<size_t>(c)]);
            for (int64_t p = 0; p < kPixels; ++p) img[p] = (img[p] - mean) * inv;
        }
}

Dataset gather(const Dataset& d, const std::vector<int64_t>& indices) {
    Dataset out;
    out.images = Tensor({static_cast<int64_t>(indices.size()), 3, 32, 32});
    out.labels.resize(indices.size());
    const int64_t stride = 3 * kPixels;
    for (size_t i = 0; i < indices.size(); ++i) {
        const int64_t src = indices[i];
        if (src < 0 || src >= d.size())
            throw std::invalid_argument("gather: index out of range");
        std::copy_n(d.images.data.begin() + src * stride, stride,
                    out.images.data.begin() + static_cast<int64_t>(i) * stride);
        out.labels[i] = d.labels[static_cast<size_t>(src)];
    }
    return out;
}

SplitDataset subset(const Dataset& train_pool, const Dataset& test_pool, const SplitSizes& sizes,
                    uint64_t seed) {
    if (sizes.train < 0 || sizes.test < 0 || sizes.mini_val < 0 || sizes.calibration < 0)
        throw std::invalid_argument("subset: negative split size");
    if (sizes.train + sizes.mini_val > train_pool.size())
        throw std::invalid_argument("subset: train+mini_val = " +
                                    std::to_string(sizes.train + sizes.mini_val) +
                                    " oversubscribes the train pool of " +
                                    std::to_string(train_pool.size()));
    if (sizes.test > test_pool.size())
        throw std::invalid_argument("subset: test split oversubscribes the test pool");
    if (sizes.calibration > sizes.train)
        throw std::invalid_argument("subset: calibration must fit inside the train split");

    Rng rng(seed);
    const std::vector<int64_t> train_perm = rng.permutation(train_pool.size());
    std::vector<int64_t> train_idx(train_perm.begin(), train_perm.begin() + sizes.train);
    std::vector<int64_t> mini_idx(train_perm.begin() + sizes.train,
                                  train_perm.begin() + sizes.train + sizes.mini_val);
    const std::vector<int64_t> test_perm = rng.permutation(test_pool.size());
    std::vector<int64_t> test_idx(test_perm.begin(), test_perm.begin() + sizes.test);
    // calibration samples from within the train split
    std::vector<int64_t> calib_idx;
    for (int64_t i : rng.sample_indices(sizes.train, sizes.calibration))
        calib_idx.push_back(train_idx[static_cast<size_t>(i)]);

    SplitDataset out;
    out.train = gather(train_pool, train_idx);
    out.mini_val = gather(train_pool, mini_idx);
    out.test = gather(test_pool, test_idx);
    out.calibration = gather(train_pool, calib_idx);
    return out;
}

}  // namespace enprune
