// Generates a synthetic dataset in the CIFAR-10 binary batch layout, for
// environments where the real corpus is not available. Drop-in compatible
// with the loader: produces data_batch_1.bin and test_batch.bin.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "synthetic_cifar.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic CIFAR-format dataset generator"};
    std::string out_dir = ".";
    int64_t train = 12000;
    int64_t test = 2000;
    uint64_t seed = 1;
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--train", train, "training images");
    app.add_option("--test", test, "test images");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out_dir);
        enprune::synth::write_batch_file(out_dir + "/data_batch_1.bin", train, seed);
        enprune::synth::write_batch_file(out_dir + "/test_batch.bin", test, seed + 1);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    std::cout << "wrote " << train << " train and " << test << " test records to " << out_dir
              << "\n";
    return 0;
}
