#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "cact/tensor.hpp"

namespace cact {

// Architecture shared by the three feature encoders. Encoders built from
// one config always produce identical output dims for identical input dims.
struct EncoderConfig {
    int layers = 5;
    std::vector<int> channels = {64, 64, 128, 128, 256};  // per layer out
    int kernel_size = 3;                                  // odd
    std::vector<int> strides = {1, 2, 2, 2, 2};
    int in_channels = 3;

    void validate() const;  // throws ShapeError on inconsistency
};

struct EncoderWeights {
    std::vector<FeatureTensor> kernels;      // (c_out, c_in, k, k) per layer
    std::vector<std::vector<float>> biases;  // c_out per layer
};

// Cross-correlation with zero padding (kernel-1)/2; output spatial dims are
// ceil(in/stride). Optionally applies a leaky rectifier (negative slope
// `slope`) to the result.
FeatureTensor conv2d_forward(const FeatureTensor& input,
                             const FeatureTensor& kernel,
                             std::span<const float> bias, int stride,
                             bool activate = false, float slope = 0.2f);

// Applies the config's conv layers in order. Every layer but the last is
// followed by the leaky rectifier.
FeatureTensor encode(const EncoderWeights& weights, const EncoderConfig& cfg,
                     const FeatureTensor& image);

// Seeded weights: kernels are uniform random scaled by 1/sqrt(fan-in),
// biases zero. Layer i draws its sub-seed from a SplitMix64 stream over
// `seed`, so layers do not share values.
EncoderWeights init_encoder(const EncoderConfig& cfg, Seed seed);

// Directory layout: encoder.json plus layer{i}_kernel.ctf / layer{i}_bias.ctf.
void save_encoder(const std::filesystem::path& dir, const EncoderConfig& cfg,
                  const EncoderWeights& weights);
EncoderWeights load_encoder_weights(const std::filesystem::path& dir,
                                    const EncoderConfig& cfg);

EncoderConfig load_encoder_config(const std::filesystem::path& json_file);
void save_encoder_config(const std::filesystem::path& json_file,
                         const EncoderConfig& cfg);

}  // namespace cact
