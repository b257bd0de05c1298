#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. Everything here is deliberately written the slow, obvious way and
// shares no code with the library paths it checks.

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "enprune/tensor.hpp"

namespace enprune::oracle {

// Six-nested-loop convolution, double accumulation, zero padding.
Tensor naive_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int64_t stride,
                    int64_t pad);

Tensor naive_linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor naive_maxpool(const Tensor& input, int64_t k);
Tensor naive_avgpool(const Tensor& input, int64_t k);

// Ridge solution W = V diag(s/(s^2+ridge)) U^T Y via one-sided Jacobi SVD.
Mat pinv_solve(const Mat& x, const Mat& y, double ridge);

// |XW - Y|^2 accumulated in double.
double residual_sq(const Mat& x, const Mat& w, const Mat& y);

// --- entropy oracles -------------------------------------------------------

// Quantized map plus status, re-derived directly from the bin formula.
struct QuantOracle {
    bool all_zero = false;
    bool constant = false;
    std::vector<int> bins;  // h*w entries when valid
};
QuantOracle quantize_oracle(const std::vector<double>& map, int64_t h, int64_t w, int64_t nbins);

// Joint counts for one offset by pair enumeration.
std::map<std::pair<int, int>, int64_t> joint_counts_oracle(const std::vector<int>& bins, int64_t h,
                                                           int64_t w, int dk, int dl);

double entropy_of_counts(const std::map<std::pair<int, int>, int64_t>& counts);

// Relative entropy H_R(dk,dl) for a quantized grid, pair enumeration route.
double relative_entropy_oracle(const std::vector<int>& bins, int64_t h, int64_t w, int dk, int dl);

// AME by the oracle route; returns false when the map is excluded.
bool ame_oracle(const std::vector<double>& map, int64_t h, int64_t w, int64_t nbins, double* out);

// Full SDE double sum by quadruple enumeration with per-offset memoization.
bool sde_oracle(const std::vector<double>& map, int64_t h, int64_t w, int64_t nbins, double* out);

}  // namespace enprune::oracle
