#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace enprune {

// Deterministic random source. The engine is std::mt19937_64 (bit-exact by
// the standard); all distributions are derived here from raw engine output so
// every stream is reproducible from its seed regardless of the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0,n), rejection sampled (no modulo bias).
    int64_t uniform_int(int64_t n) {
        if (n <= 0) return 0;
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return static_cast<int64_t>(x % un);
    }

    // Standard normal via Box-Muller; the spare value is discarded so the
    // stream position is a pure function of the call count.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Normal(0, sigma) truncated to [-cut*sigma, cut*sigma] by resampling.
    double truncated_normal(double sigma, double cut) {
        if (sigma <= 0.0) return 0.0;
        double x;
        do {
            x = normal();
        } while (std::fabs(x) > cut);
        return x * sigma;
    }

    std::vector<int64_t> permutation(int64_t n) {
        std::vector<int64_t> p(static_cast<size_t>(n));
        std::iota(p.begin(), p.end(), int64_t{0});
        for (int64_t i = n - 1; i > 0; --i) {
            const int64_t j = uniform_int(i + 1);
            std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
        }
        return p;
    }

    // First k entries of a permutation of [0,n), ascending.
    std::vector<int64_t> sample_indices(int64_t n, int64_t k) {
        auto p = permutation(n);
        p.resize(static_cast<size_t>(k));
        std::sort(p.begin(), p.end());
        return p;
    }

    // Derive an independent substream.
    Rng fork() { return Rng(eng_()); }

private:
    std::mt19937_64 eng_;
};

}  // namespace enprune
