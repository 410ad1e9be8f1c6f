#pragma once

#include <filesystem>

#include "cact/tensor.hpp"

namespace cact {

// Knobs of the compact attention. `p` is the basis count, `s` the number of
// alternating update iterations, `lambda` the momentum blend weight applied
// at every iteration, `eps` the normalization guard, `seed` drives the
// random basis init.
struct AttentionConfig {
    int p = 128;
    int s = 3;
    double lambda = 0.9;
    double eps = 1e-12;
    Seed seed{42};

    void validate() const;
};

// p x c matrix of basis vectors; rows are unit L2 norm (or zero) after any
// extraction step.
struct BasisSet {
    Matrix mat;
};

// Row-stochastic per-pixel weights over the p bases.
struct AttentionMap {
    Matrix mat;
};

struct EmStepResult {
    BasisSet basis;      // momentum-blended and renormalized update
    AttentionMap map;    // attention computed from the *input* basis
};

// One alternation: map from the input basis, new basis from the map,
// momentum blend, renormalize.
//   A   = softmax_rows(x_l . basis^T)
//   Bn  = l2_normalize_rows(A^T . x_l, eps)
//   out = l2_normalize_rows((1 - lambda) * basis + lambda * Bn, eps)
EmStepResult basis_em_step(const Matrix& x_l, const BasisSet& b_l,
                           double lambda, double eps);

struct ExtractResult {
    BasisSet b_l;
    AttentionMap a_b;  // recomputed from the final basis
};

// Random unit-row init, `s` alternating steps, then one extra attention
// evaluation so the returned map is consistent with the returned basis.
ExtractResult extract_bases(const Matrix& x_l, const AttentionConfig& cfg);

// Appearance bases reuse the semantic attention map instead of iterating:
// B_a = l2_normalize_rows(a_b^T . x_a, eps).
BasisSet appearance_basis(const Matrix& x_a, const AttentionMap& a_b,
                          double eps);

struct AggregateResult {
    FeatureTensor x_basis;  // (c, h, w)
    AttentionMap a_in;      // (h*w, p)
};

// A_in = softmax_rows(x_in . b_l^T); x_basis = A_in . b_a reshaped to
// (c, h, w).
AggregateResult aggregate(const Matrix& x_in, const BasisSet& b_l,
                          const BasisSet& b_a, std::size_t h, std::size_t w);

struct CompactAttentionOutput {
    FeatureTensor x_basis;  // same dims as the input-label features
    BasisSet b_l;
    BasisSet b_a;
    AttentionMap a_b;
    AttentionMap a_in;
};

// Full pipeline over encoder outputs: x_in (c, h, w), x_a and x_l
// (m, c, h, w). The reference spatial dims may differ from the input's;
// only the channel count must agree.
CompactAttentionOutput compact_attention(const FeatureTensor& x_in,
                                         const FeatureTensor& x_a,
                                         const FeatureTensor& x_l,
                                         const AttentionConfig& cfg);

// Baseline attending every input pixel over all m*h*w reference pixels
// jointly; cost grows linearly with the reference count.
FeatureTensor pixelwise_attention(const FeatureTensor& x_in,
                                  const FeatureTensor& x_a,
                                  const FeatureTensor& x_l);

AttentionConfig load_attention_config(const std::filesystem::path& json_file);
void save_attention_config(const std::filesystem::path& json_file,
                           const AttentionConfig& cfg);

}  // namespace cact
