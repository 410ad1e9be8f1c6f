#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cact/errors.hpp"

namespace cact {

// Seed for the deterministic generator. Same seed, same bits, on every
// platform.
struct Seed {
    std::uint64_t value = 0;
};

// SplitMix64 step: golden-gamma increment, then the mix whose output the
// caller consumes.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Dense row-major tensor, float32 storage. Every extent must be >= 1 and
// product(dims) == data.size().
struct FeatureTensor {
    std::vector<std::size_t> dims;
    std::vector<float> data;

    FeatureTensor() = default;
    explicit FeatureTensor(std::vector<std::size_t> d);  // zero filled
    FeatureTensor(std::vector<std::size_t> d, std::vector<float> v);

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return dims.size(); }
};

// Dense row-major matrix, float32 storage.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c);  // zero filled
    Matrix(std::size_t r, std::size_t c, std::vector<float> v);

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const float> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }
};

std::size_t checked_product(std::span<const std::size_t> dims);

// a (r x k) times b (k x n). Accumulates in double, stores float32.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Row-wise softmax with max subtraction; each output row sums to 1.
Matrix softmax_rows(const Matrix& a);

// Divides each row by max(L2 norm, eps); zero rows stay zero.
Matrix l2_normalize_rows(const Matrix& a, double eps);

// Uniform values in [-1, 1]: one SplitMix64 word per element, high 24 bits
// become the mantissa. Bit-reproducible for a given (dims, seed).
FeatureTensor random_fill(const std::vector<std::size_t>& dims, Seed seed);

// Pure row-major relabeling; element counts must match.
FeatureTensor reshape(const FeatureTensor& t, std::vector<std::size_t> new_dims);

// (m, c, h, w) -> (m*h*w, c): pixel (im, ih, iw) lands on row
// im*h*w + ih*w + iw, channels become columns.
Matrix flatten_refs(const FeatureTensor& x);

// Inverse pixel layout for a single image: (h*w, c) -> (c, h, w).
FeatureTensor unflatten_pixels(const Matrix& m, std::size_t c, std::size_t h,
                               std::size_t w);

FeatureTensor to_tensor(const Matrix& m);  // dims {rows, cols}
Matrix to_matrix(const FeatureTensor& t);  // requires ndim == 2

// Thread-local tallies of what actually ran, used to cross-check the
// benchmark's closed-form cost model.
namespace opcount {
void reset();
std::uint64_t multiply_adds();    // matmul multiply-add count
std::uint64_t softmax_entries();  // entries passed through softmax_rows
std::uint64_t total();
}  // namespace opcount

}  // namespace cact
