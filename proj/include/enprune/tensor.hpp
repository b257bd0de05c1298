#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace enprune {

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

// Dense row-major tensor. Activations are N,C,H,W; conv weights Cout,Cin,Kh,Kw;
// linear weights Out,In. Storage is float32; accumulation happens in double
// inside the kernels that consume it.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s, float fill = 0.0f) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel(shape)), fill);
    }
    static Tensor from(std::vector<int64_t> s, std::vector<float> d) {
        Tensor t;
        t.shape = std::move(s);
        if (static_cast<int64_t>(d.size()) != numel(t.shape))
            throw std::invalid_argument("Tensor::from: data length " + std::to_string(d.size()) +
                                        " does not match shape " + shape_str(t.shape));
        t.data = std::move(d);
        return t;
    }

    static int64_t numel(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t e : s) {
            if (e < 0) throw std::invalid_argument("Tensor: negative extent in " + shape_str(s));
            n *= e;
        }
        return n;
    }

    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }
    int64_t size() const { return static_cast<int64_t>(data.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    float& operator()(int64_t i) {
        assert(rank() == 1);
        return data[static_cast<size_t>(i)];
    }
    float operator()(int64_t i) const {
        assert(rank() == 1);
        return data[static_cast<size_t>(i)];
    }
    float& operator()(int64_t r, int64_t c) {
        assert(rank() == 2);
        return data[static_cast<size_t>(r * shape[1] + c)];
    }
    float operator()(int64_t r, int64_t c) const {
        assert(rank() == 2);
        return data[static_cast<size_t>(r * shape[1] + c)];
    }
    float& operator()(int64_t n, int64_t c, int64_t h, int64_t w) {
        assert(rank() == 4);
        return data[static_cast<size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    float operator()(int64_t n, int64_t c, int64_t h, int64_t w) const {
        assert(rank() == 4);
        return data[static_cast<size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
    void check_finite(const char* what) const {
        if (!all_finite())
            throw std::runtime_error(std::string(what) + ": non-finite value in tensor " +
                                     shape_str(shape));
    }
};

// Row-major float matrix for patch/output tables and least-squares systems.
struct Mat {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<float> data;

    Mat() = default;
    Mat(int64_t r, int64_t c, float fill = 0.0f)
        : rows(r), cols(c), data(static_cast<size_t>(r * c), fill) {}

    float& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols + c)]; }
    float at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols + c)]; }
    const float* row(int64_t r) const { return data.data() + r * cols; }
    float* row(int64_t r) { return data.data() + r * cols; }
};

}  // namespace enprune
