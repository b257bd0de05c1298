#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>

#include "enprune/dataset.hpp"
#include "synthetic_cifar.hpp"

using namespace enprune;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/enprune_ds_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("record arithmetic: 10000 records is 30,730,000 bytes") {
    const auto records = synth::make_records(40, 9);
    CHECK(records.size() == 40u * 3073u);
    CHECK(10000LL * 3073LL == 30730000LL);
}

TEST_CASE("load_cifar10 parses crafted records") {
    SUBCASE("single record, label 3, all pixels 255") {
        TempFile f("one_record.bin");
        std::vector<uint8_t> bytes(3073, 255);
        bytes[0] = 3;
        write_bytes(f.path, bytes);
        const Dataset d = load_cifar10({f.path});
        CHECK(d.size() == 1);
        CHECK(d.labels[0] == 3);
        for (float v : d.images.data) CHECK(v == 1.0f);
    }
    SUBCASE("channel layout is planar R,G,B") {
        TempFile f("planar.bin");
        std::vector<uint8_t> bytes(3073, 0);
        bytes[0] = 0;
        bytes[1] = 255;               // R plane, pixel (0,0)
        bytes[1 + 1024 + 33] = 128;   // G plane, pixel (1,1)
        write_bytes(f.path, bytes);
        const Dataset d = load_cifar10({f.path});
        CHECK(d.images(0, 0, 0, 0) == 1.0f);
        CHECK(d.images(0, 1, 1, 1) == doctest::Approx(128.0 / 255.0));
        CHECK(d.images(0, 2, 0, 0) == 0.0f);
    }
    SUBCASE("truncated file is rejected with the offending offset") {
        TempFile f("truncated.bin");
        write_bytes(f.path, std::vector<uint8_t>(3073 + 100, 0));
        CHECK_THROWS_WITH_AS(load_cifar10({f.path}), doctest::Contains("3073"),
                             std::runtime_error);
    }
    SUBCASE("bad label is rejected with a byte offset") {
        TempFile f("badlabel.bin");
        std::vector<uint8_t> bytes(2 * 3073, 0);
        bytes[3073] = 11;
        write_bytes(f.path, bytes);
        CHECK_THROWS_WITH_AS(load_cifar10({f.path}), doctest::Contains("offset 3073"),
                             std::runtime_error);
    }
    SUBCASE("multiple batch files concatenate") {
        TempFile a("batch_a.bin"), b("batch_b.bin");
        write_bytes(a.path, synth::make_records(30, 1));
        write_bytes(b.path, synth::make_records(20, 2));
        const Dataset d = load_cifar10({a.path, b.path});
        CHECK(d.size() == 50);
    }
}

TEST_CASE("standardization zeroes the channel means") {
    TempFile f("std.bin");
    write_bytes(f.path, synth::make_records(200, 3));
    Dataset d = load_cifar10({f.path});
    const ChannelStats stats = compute_channel_stats(d);
    for (double m : stats.mean) CHECK(m > 0.0);
    standardize(d, stats);
    const ChannelStats after = compute_channel_stats(d);
    for (double m : after.mean) CHECK(std::fabs(m) < 1e-4);
    for (double s : after.stdev) CHECK(s == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("subset sampling") {
    TempFile tr("pool_train.bin"), te("pool_test.bin");
    write_bytes(tr.path, synth::make_records(300, 5));
    write_bytes(te.path, synth::make_records(100, 6));
    Dataset train_pool = load_cifar10({tr.path});
    const Dataset test_pool = load_cifar10({te.path});
    // tag every pool image so subset membership can be traced
    for (int64_t i = 0; i < train_pool.size(); ++i)
        train_pool.images.data[static_cast<size_t>(i * 3072)] = static_cast<float>(i);

    SplitSizes sizes;
    sizes.train = 200;
    sizes.mini_val = 100;
    sizes.test = 50;
    sizes.calibration = 40;

    SUBCASE("train and mini-val partition the pool when sizes sum to N") {
        const SplitDataset s = subset(train_pool, test_pool, sizes, 11);
        CHECK(s.train.size() == 200);
        CHECK(s.mini_val.size() == 100);
        std::set<float> seen;
        for (int64_t i = 0; i < s.train.size(); ++i)
            seen.insert(s.train.images(i, 0, 0, 0));
        for (int64_t i = 0; i < s.mini_val.size(); ++i)
            seen.insert(s.mini_val.images(i, 0, 0, 0));
        CHECK(seen.size() == 300);  // disjoint and exhaustive
    }
    SUBCASE("calibration is a subset of train") {
        const SplitDataset s = subset(train_pool, test_pool, sizes, 11);
        std::set<float> train_tags;
        for (int64_t i = 0; i < s.train.size(); ++i)
            train_tags.insert(s.train.images(i, 0, 0, 0));
        for (int64_t i = 0; i < s.calibration.size(); ++i)
            CHECK(train_tags.count(s.calibration.images(i, 0, 0, 0)) == 1);
    }
    SUBCASE("same seed reproduces the same split") {
        const SplitDataset a = subset(train_pool, test_pool, sizes, 11);
        const SplitDataset b = subset(train_pool, test_pool, sizes, 11);
        CHECK(a.train.images.data == b.train.images.data);
        CHECK(a.calibration.images.data == b.calibration.images.data);
        const SplitDataset c = subset(train_pool, test_pool, sizes, 12);
        CHECK(a.train.images.data != c.train.images.data);
    }
    SUBCASE("oversubscription is rejected") {
        SplitSizes bad = sizes;
        bad.train = 250;  // 250 + 100 > 300
        CHECK_THROWS_AS(subset(train_pool, test_pool, bad, 11), std::invalid_argument);
        bad = sizes;
        bad.calibration = 201;
        CHECK_THROWS_AS(subset(train_pool, test_pool, bad, 11), std::invalid_argument);
    }
}
