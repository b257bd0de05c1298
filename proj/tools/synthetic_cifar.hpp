#pragma once

// Synthetic 10-class image corpus in the CIFAR-10 binary batch layout
// (3073-byte records: label byte + 1024 R + 1024 G + 1024 B). Classes are
// separable but not trivial: each combines an oriented grating, a
// class-colored patch, and per-image phase/position/brightness jitter under
// pixel noise, so classification accuracy degrades gracefully as capacity is
// pruned away.

#include <cstdint>
#include <string>
#include <vector>

namespace enprune::synth {

// n_images records with balanced labels (label = i mod 10).
std::vector<uint8_t> make_records(int64_t n_images, uint64_t seed);

void write_batch_file(const std::string& path, int64_t n_images, uint64_t seed);

}  // namespace enprune::synth
