#include "cact/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cact {

namespace {

std::string dims_to_string(std::span<const std::size_t> dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(dims[i]);
    }
    return s + ")";
}

}  // namespace

std::size_t checked_product(std::span<const std::size_t> dims) {
    if (dims.empty()) throw ShapeError("tensor needs at least one dimension");
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d == 0)
            throw ShapeError("zero extent in dims " + dims_to_string(dims));
        if (d > std::numeric_limits<std::size_t>::max() / n)
            throw ShapeError("extent product overflow in dims " +
                             dims_to_string(dims));
        n *= d;
    }
    return n;
}

FeatureTensor::FeatureTensor(std::vector<std::size_t> d) : dims(std::move(d)) {
    data.assign(checked_product(dims), 0.0f);
}

FeatureTensor::FeatureTensor(std::vector<std::size_t> d, std::vector<float> v)
    : dims(std::move(d)), data(std::move(v)) {
    if (checked_product(dims) != data.size())
        throw ShapeError("dims " + dims_to_string(dims) + " imply " +
                         std::to_string(checked_product(dims)) +
                         " values, got " + std::to_string(data.size()));
}

Matrix::Matrix(std::size_t r, std::size_t c) : rows(r), cols(c) {
    data.assign(r * c, 0.0f);
}

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<float> v)
    : rows(r), cols(c), data(std::move(v)) {
    if (rows * cols != data.size())
        throw ShapeError("matrix " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " needs " +
                         std::to_string(rows * cols) + " values, got " +
                         std::to_string(data.size()));
}

namespace opcount {
namespace {
thread_local std::uint64_t g_macs = 0;
thread_local std::uint64_t g_softmax = 0;
}  // namespace

void reset() {
    g_macs = 0;
    g_softmax = 0;
}
std::uint64_t multiply_adds() { return g_macs; }
std::uint64_t softmax_entries() { return g_softmax; }
std::uint64_t total() { return g_macs + g_softmax; }
}  // namespace opcount

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.rows == 0 || a.cols == 0 || b.rows == 0 || b.cols == 0)
        throw ShapeError("matmul on empty matrix");
    if (a.cols != b.rows)
        throw ShapeError("matmul mismatch: " + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " times " +
                         std::to_string(b.rows) + "x" + std::to_string(b.cols));
    Matrix out(a.rows, b.cols);
    std::vector<double> acc(b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.data[i * a.cols + k];
            const float* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) acc[j] += aik * brow[j];
        }
        float* orow = out.data.data() + i * out.cols;
        for (std::size_t j = 0; j < b.cols; ++j)
            orow[j] = static_cast<float>(acc[j]);
    }
    opcount::g_macs += a.rows * a.cols * b.cols;
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            out.data[j * a.rows + i] = a.data[i * a.cols + j];
    return out;
}

Matrix softmax_rows(const Matrix& a) {
    if (a.rows == 0 || a.cols == 0) throw ShapeError("softmax_rows on empty matrix");
    Matrix out(a.rows, a.cols);
    std::vector<double> e(a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const float* row = a.data.data() + i * a.cols;
        double mx = row[0];
        for (std::size_t j = 1; j < a.cols; ++j) mx = std::max<double>(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) {
            e[j] = std::exp(static_cast<double>(row[j]) - mx);
            sum += e[j];
        }
        float* orow = out.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j)
            orow[j] = static_cast<float>(e[j] / sum);
    }
    opcount::g_softmax += a.rows * a.cols;
    return out;
}

Matrix l2_normalize_rows(const Matrix& a, double eps) {
    if (a.rows == 0 || a.cols == 0)
        throw ShapeError("l2_normalize_rows on empty matrix");
    if (!(eps > 0.0)) throw Error("l2_normalize_rows: eps must be positive");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const float* row = a.data.data() + i * a.cols;
        double sq = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j)
            sq += static_cast<double>(row[j]) * row[j];
        const double inv = 1.0 / std::max(std::sqrt(sq), eps);
        float* orow = out.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j)
            orow[j] = static_cast<float>(row[j] * inv);
    }
    return out;
}

FeatureTensor random_fill(const std::vector<std::size_t>& dims, Seed seed) {
    FeatureTensor t(dims);
    std::uint64_t state = seed.value;
    for (float& v : t.data) {
        const std::uint64_t z = splitmix64_next(state);
        const std::uint64_t hi = z >> 40;  // top 24 bits
        v = static_cast<float>(static_cast<double>(hi) * (2.0 / 16777216.0) - 1.0);
    }
    return t;
}

FeatureTensor reshape(const FeatureTensor& t, std::vector<std::size_t> new_dims) {
    if (checked_product(new_dims) != t.size())
        throw ShapeError("reshape to " + dims_to_string(new_dims) + " needs " +
                         std::to_string(checked_product(new_dims)) +
                         " values, tensor has " + std::to_string(t.size()));
    return FeatureTensor(std::move(new_dims), t.data);
}

Matrix flatten_refs(const FeatureTensor& x) {
    if (x.ndim() != 4)
        throw ShapeError("flatten_refs expects a (m, c, h, w) tensor, got " +
                         std::to_string(x.ndim()) + " dims");
    const std::size_t m = x.dims[0], c = x.dims[1], h = x.dims[2], w = x.dims[3];
    Matrix out(m * h * w, c);
    for (std::size_t im = 0; im < m; ++im)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const float* src = x.data.data() + ((im * c + ch) * h) * w;
            for (std::size_t ih = 0; ih < h; ++ih)
                for (std::size_t iw = 0; iw < w; ++iw)
                    out.data[(im * h * w + ih * w + iw) * c + ch] =
                        src[ih * w + iw];
        }
    return out;
}

FeatureTensor unflatten_pixels(const Matrix& m, std::size_t c, std::size_t h,
                               std::size_t w) {
    if (m.rows != h * w || m.cols != c)
        throw ShapeError("unflatten_pixels: matrix " + std::to_string(m.rows) +
                         "x" + std::to_string(m.cols) + " does not match (" +
                         std::to_string(h * w) + ", " + std::to_string(c) + ")");
    FeatureTensor out({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ih = 0; ih < h; ++ih)
            for (std::size_t iw = 0; iw < w; ++iw)
                out.data[(ch * h + ih) * w + iw] =
                    m.data[(ih * w + iw) * c + ch];
    return out;
}

FeatureTensor to_tensor(const Matrix& m) {
    if (m.rows == 0 || m.cols == 0) throw ShapeError("to_tensor on empty matrix");
    return FeatureTensor({m.rows, m.cols}, m.data);
}

Matrix to_matrix(const FeatureTensor& t) {
    if (t.ndim() != 2)
        throw ShapeError("to_matrix expects a rank-2 tensor, got " +
                         std::to_string(t.ndim()) + " dims");
    return Matrix(t.dims[0], t.dims[1], t.data);
}

}  // namespace cact
