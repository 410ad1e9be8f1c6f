#include "cact/attention.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

namespace cact {

void AttentionConfig::validate() const {
    if (p < 1) throw ShapeError("attention: p must be >= 1");
    if (s < 1) throw ShapeError("attention: s must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw Error("attention: lambda must be in [0, 1]");
    if (!(eps > 0.0)) throw Error("attention: eps must be positive");
}

namespace {

// Momentum blend in double, stored back to float32.
Matrix blend(const Matrix& a, const Matrix& b, double lambda) {
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        out.data[i] = static_cast<float>((1.0 - lambda) * a.data[i] +
                                         lambda * b.data[i]);
    return out;
}

}  // namespace

EmStepResult basis_em_step(const Matrix& x_l, const BasisSet& b_l,
                           double lambda, double eps) {
    if (b_l.mat.cols != x_l.cols)
        throw ShapeError("basis_em_step: basis has " +
                         std::to_string(b_l.mat.cols) + " channels, features " +
                         std::to_string(x_l.cols));
    AttentionMap map{softmax_rows(matmul(x_l, transpose(b_l.mat)))};
    Matrix b_new = l2_normalize_rows(matmul(transpose(map.mat), x_l), eps);
    Matrix blended = l2_normalize_rows(blend(b_l.mat, b_new, lambda), eps);
    return EmStepResult{BasisSet{std::move(blended)}, std::move(map)};
}

ExtractResult extract_bases(const Matrix& x_l, const AttentionConfig& cfg) {
    cfg.validate();
    if (x_l.rows == 0 || x_l.cols == 0)
        throw ShapeError("extract_bases: empty feature matrix");

    const auto p = static_cast<std::size_t>(cfg.p);
    BasisSet basis{l2_normalize_rows(
        to_matrix(random_fill({p, x_l.cols}, cfg.seed)), cfg.eps)};
    for (int i = 0; i < cfg.s; ++i)
        basis = basis_em_step(x_l, basis, cfg.lambda, cfg.eps).basis;

    // One extra attention evaluation keeps the shared map consistent with
    // the final basis.
    AttentionMap a_b{softmax_rows(matmul(x_l, transpose(basis.mat)))};
    return ExtractResult{std::move(basis), std::move(a_b)};
}

BasisSet appearance_basis(const Matrix& x_a, const AttentionMap& a_b,
                          double eps) {
    if (a_b.mat.rows != x_a.rows)
        throw ShapeError("appearance_basis: map has " +
                         std::to_string(a_b.mat.rows) + " rows, features " +
                         std::to_string(x_a.rows));
    return BasisSet{l2_normalize_rows(matmul(transpose(a_b.mat), x_a), eps)};
}

AggregateResult aggregate(const Matrix& x_in, const BasisSet& b_l,
                          const BasisSet& b_a, std::size_t h, std::size_t w) {
    if (x_in.cols != b_l.mat.cols || x_in.cols != b_a.mat.cols)
        throw ShapeError("aggregate: channel mismatch between features (" +
                         std::to_string(x_in.cols) + ") and bases (" +
                         std::to_string(b_l.mat.cols) + ", " +
                         std::to_string(b_a.mat.cols) + ")");
    if (b_l.mat.rows != b_a.mat.rows)
        throw ShapeError("aggregate: basis counts differ");
    if (x_in.rows != h * w)
        throw ShapeError("aggregate: feature rows " + std::to_string(x_in.rows) +
                         " do not match h*w = " + std::to_string(h * w));
    AttentionMap a_in{softmax_rows(matmul(x_in, transpose(b_l.mat)))};
    Matrix flat = matmul(a_in.mat, b_a.mat);
    return AggregateResult{unflatten_pixels(flat, x_in.cols, h, w),
                           std::move(a_in)};
}

namespace {

void check_attention_inputs(const FeatureTensor& x_in, const FeatureTensor& x_a,
                            const FeatureTensor& x_l) {
    if (x_in.ndim() != 3)
        throw ShapeError("attention: x_in must be (c, h, w), got " +
                         std::to_string(x_in.ndim()) + " dims");
    if (x_a.ndim() != 4 || x_l.ndim() != 4)
        throw ShapeError("attention: references must be (m, c, h, w)");
    if (x_a.dims != x_l.dims)
        throw ShapeError("attention: appearance and label reference dims differ");
    if (x_a.dims[1] != x_in.dims[0])
        throw ShapeError("attention: reference channels " +
                         std::to_string(x_a.dims[1]) + " vs input channels " +
                         std::to_string(x_in.dims[0]));
}

}  // namespace

CompactAttentionOutput compact_attention(const FeatureTensor& x_in,
                                         const FeatureTensor& x_a,
                                         const FeatureTensor& x_l,
                                         const AttentionConfig& cfg) {
    check_attention_inputs(x_in, x_a, x_l);
    const std::size_t c = x_in.dims[0], h = x_in.dims[1], w = x_in.dims[2];

    Matrix xl_flat = flatten_refs(x_l);
    Matrix xa_flat = flatten_refs(x_a);
    Matrix xin_flat = flatten_refs(reshape(x_in, {1, c, h, w}));

    ExtractResult ext = extract_bases(xl_flat, cfg);
    BasisSet b_a = appearance_basis(xa_flat, ext.a_b, cfg.eps);
    AggregateResult agg = aggregate(xin_flat, ext.b_l, b_a, h, w);

    return CompactAttentionOutput{std::move(agg.x_basis), std::move(ext.b_l),
                                  std::move(b_a), std::move(ext.a_b),
                                  std::move(agg.a_in)};
}

FeatureTensor pixelwise_attention(const FeatureTensor& x_in,
                                  const FeatureTensor& x_a,
                                  const FeatureTensor& x_l) {
    check_attention_inputs(x_in, x_a, x_l);
    const std::size_t c = x_in.dims[0], h = x_in.dims[1], w = x_in.dims[2];

    Matrix xin_flat = flatten_refs(reshape(x_in, {1, c, h, w}));
    Matrix xl_flat = flatten_refs(x_l);
    Matrix xa_flat = flatten_refs(x_a);

    Matrix weights = softmax_rows(matmul(xin_flat, transpose(xl_flat)));
    Matrix flat = matmul(weights, xa_flat);
    return unflatten_pixels(flat, c, h, w);
}

AttentionConfig load_attention_config(const std::filesystem::path& json_file) {
    std::ifstream f(json_file);
    if (!f) throw FormatError("cannot open: " + json_file.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(json_file.string() + ": invalid JSON: " + e.what());
    }
    AttentionConfig cfg;
    try {
        if (j.contains("p")) cfg.p = j.at("p").get<int>();
        if (j.contains("s")) cfg.s = j.at("s").get<int>();
        if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
        if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
        if (j.contains("seed")) cfg.seed.value = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(json_file.string() + ": bad attention config: " +
                          e.what());
    }
    cfg.validate();
    return cfg;
}

void save_attention_config(const std::filesystem::path& json_file,
                           const AttentionConfig& cfg) {
    std::ofstream f(json_file, std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + json_file.string());
    f << nlohmann::json{{"p", cfg.p},
                        {"s", cfg.s},
                        {"lambda", cfg.lambda},
                        {"eps", cfg.eps},
                        {"seed", cfg.seed.value}}
             .dump(2)
      << "\n";
}

}  // namespace cact
