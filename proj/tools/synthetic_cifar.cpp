#include "synthetic_cifar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "enprune/rng.hpp"

namespace enprune::synth {

namespace {

void render_image(int label, Rng& rng, uint8_t* out) {
    // class identity rides on flip- and crop-invariant features (spatial
    // frequency, color mixture, patch size); orientation, phase, patch
    // position, and brightness are per-image nuisance draws
    const double freq = 1.5 + 0.6 * static_cast<double>(label);
    const double theta = rng.uniform(0.0, M_PI);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double ct = std::cos(theta), st = std::sin(theta);

    const double wr = 0.38 + 0.27 * std::cos(2.0 * M_PI * label / 10.0);
    const double wg = 0.38 + 0.27 * std::cos(2.0 * M_PI * label / 10.0 + 2.1);
    const double wb = 0.38 + 0.27 * std::cos(2.0 * M_PI * label / 10.0 + 4.2);
    const double chan[3] = {wr, wg, wb};

    const int64_t half = 2 + (label % 5);
    const int64_t cy = 6 + rng.uniform_int(20);
    const int64_t cx = 6 + rng.uniform_int(20);
    const double brightness = rng.uniform(-0.08, 0.08);

    for (int64_t y = 0; y < 32; ++y)
        for (int64_t x = 0; x < 32; ++x) {
            const double g =
                0.5 + 0.35 * std::sin(2.0 * M_PI * freq * (x * ct + y * st) / 32.0 + phase);
            const bool in_patch =
                std::llabs(y - cy) <= half && std::llabs(x - cx) <= half;
            for (int64_t c = 0; c < 3; ++c) {
                double v = brightness +
                           (in_patch ? chan[c] * (1.0 - g) + 0.25 : chan[c] * g) +
                           rng.normal() * 0.06;
                v = std::clamp(v, 0.0, 1.0);
                out[c * 1024 + y * 32 + x] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
        }
}

}  // namespace

std::vector<uint8_t> make_records(int64_t n_images, uint64_t seed) {
    if (n_images < 1) throw std::invalid_argument("make_records: need at least one image");
    Rng rng(seed);
    std::vector<uint8_t> bytes(static_cast<size_t>(n_images) * 3073);
    for (int64_t i = 0; i < n_images; ++i) {
        uint8_t* rec = bytes.data() + i * 3073;
        const int label = static_cast<int>(i % 10);
        rec[0] = static_cast<uint8_t>(label);
        render_image(label, rng, rec + 1);
    }
    return bytes;
}

void write_batch_file(const std::string& path, int64_t n_images, uint64_t seed) {
    const std::vector<uint8_t> bytes = make_records(n_images, seed);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_batch_file: cannot open '" + path + "'");
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write_batch_file: write failed for '" + path + "'");
}

}  // namespace enprune::synth
