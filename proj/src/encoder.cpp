#include "cact/encoder.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cact/tensor_io.hpp"

namespace cact {

void EncoderConfig::validate() const {
    if (layers < 1) throw ShapeError("encoder: layers must be >= 1");
    if (in_channels < 1) throw ShapeError("encoder: in_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ShapeError("encoder: kernel_size must be odd and >= 1");
    if (static_cast<int>(channels.size()) != layers)
        throw ShapeError("encoder: channels has " +
                         std::to_string(channels.size()) + " entries for " +
                         std::to_string(layers) + " layers");
    if (static_cast<int>(strides.size()) != layers)
        throw ShapeError("encoder: strides has " +
                         std::to_string(strides.size()) + " entries for " +
                         std::to_string(layers) + " layers");
    for (int c : channels)
        if (c < 1) throw ShapeError("encoder: channel counts must be >= 1");
    for (int s : strides)
        if (s < 1) throw ShapeError("encoder: strides must be >= 1");
}

FeatureTensor conv2d_forward(const FeatureTensor& input,
                             const FeatureTensor& kernel,
                             std::span<const float> bias, int stride,
                             bool activate, float slope) {
    if (input.ndim() != 3)
        throw ShapeError("conv2d: input must be (c, h, w), got " +
                         std::to_string(input.ndim()) + " dims");
    if (kernel.ndim() != 4)
        throw ShapeError("conv2d: kernel must be (c_out, c_in, kh, kw)");
    const std::size_t c_in = input.dims[0], h = input.dims[1], w = input.dims[2];
    const std::size_t c_out = kernel.dims[0];
    const std::size_t kh = kernel.dims[2], kw = kernel.dims[3];
    if (kernel.dims[1] != c_in)
        throw ShapeError("conv2d: kernel expects " +
                         std::to_string(kernel.dims[1]) + " input channels, got " +
                         std::to_string(c_in));
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ShapeError("conv2d: kernel spatial size must be odd");
    if (bias.size() != c_out)
        throw ShapeError("conv2d: bias has " + std::to_string(bias.size()) +
                         " entries for " + std::to_string(c_out) + " channels");
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");

    const std::size_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const std::size_t s = static_cast<std::size_t>(stride);
    const std::size_t oh = (h + s - 1) / s, ow = (w + s - 1) / s;  // ceil

    FeatureTensor out({c_out, oh, ow});
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = bias[co];
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    const float* in_ch = input.data.data() + (ci * h) * w;
                    const float* k_ch =
                        kernel.data.data() + ((co * c_in + ci) * kh) * kw;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(y * s + ky) -
                            static_cast<std::ptrdiff_t>(ph);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h))
                            continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(x * s + kx) -
                                static_cast<std::ptrdiff_t>(pw);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                                continue;
                            acc += static_cast<double>(in_ch[iy * w + ix]) *
                                   k_ch[ky * kw + kx];
                        }
                    }
                }
                if (activate && acc < 0.0) acc *= slope;
                out.data[(co * oh + y) * ow + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

FeatureTensor encode(const EncoderWeights& weights, const EncoderConfig& cfg,
                     const FeatureTensor& image) {
    cfg.validate();
    if (image.ndim() != 3)
        throw ShapeError("encode: image must be (c, h, w)");
    if (image.dims[0] != static_cast<std::size_t>(cfg.in_channels))
        throw ShapeError("encode: image has " + std::to_string(image.dims[0]) +
                         " channels, config expects " +
                         std::to_string(cfg.in_channels));
    if (weights.kernels.size() != static_cast<std::size_t>(cfg.layers) ||
        weights.biases.size() != static_cast<std::size_t>(cfg.layers))
        throw ShapeError("encode: weights do not cover all layers");

    FeatureTensor x = image;
    for (int i = 0; i < cfg.layers; ++i) {
        const bool last = (i == cfg.layers - 1);
        x = conv2d_forward(x, weights.kernels[i], weights.biases[i],
                           cfg.strides[i], /*activate=*/!last);
    }
    return x;
}

EncoderWeights init_encoder(const EncoderConfig& cfg, Seed seed) {
    cfg.validate();
    EncoderWeights w;
    std::uint64_t stream = seed.value;
    std::size_t c_in = static_cast<std::size_t>(cfg.in_channels);
    const std::size_t k = static_cast<std::size_t>(cfg.kernel_size);
    for (int i = 0; i < cfg.layers; ++i) {
        const std::size_t c_out = static_cast<std::size_t>(cfg.channels[i]);
        const Seed layer_seed{splitmix64_next(stream)};
        FeatureTensor kern = random_fill({c_out, c_in, k, k}, layer_seed);
        const double scale = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
        for (float& v : kern.data)
            v = static_cast<float>(static_cast<double>(v) * scale);
        w.kernels.push_back(std::move(kern));
        w.biases.emplace_back(c_out, 0.0f);
        c_in = c_out;
    }
    return w;
}

namespace {

nlohmann::json config_to_json(const EncoderConfig& cfg) {
    return nlohmann::json{{"layers", cfg.layers},
                          {"channels", cfg.channels},
                          {"kernel_size", cfg.kernel_size},
                          {"strides", cfg.strides},
                          {"in_channels", cfg.in_channels}};
}

EncoderConfig config_from_json(const nlohmann::json& j, const std::string& src) {
    EncoderConfig cfg;
    try {
        if (j.contains("layers")) cfg.layers = j.at("layers").get<int>();
        if (j.contains("channels"))
            cfg.channels = j.at("channels").get<std::vector<int>>();
        if (j.contains("kernel_size"))
            cfg.kernel_size = j.at("kernel_size").get<int>();
        if (j.contains("strides"))
            cfg.strides = j.at("strides").get<std::vector<int>>();
        if (j.contains("in_channels"))
            cfg.in_channels = j.at("in_channels").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(src + ": bad encoder config: " + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace

EncoderConfig load_encoder_config(const std::filesystem::path& json_file) {
    std::ifstream f(json_file);
    if (!f) throw FormatError("cannot open: " + json_file.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(json_file.string() + ": invalid JSON: " + e.what());
    }
    return config_from_json(j, json_file.string());
}

void save_encoder_config(const std::filesystem::path& json_file,
                         const EncoderConfig& cfg) {
    std::ofstream f(json_file, std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + json_file.string());
    f << config_to_json(cfg).dump(2) << "\n";
}

void save_encoder(const std::filesystem::path& dir, const EncoderConfig& cfg,
                  const EncoderWeights& weights) {
    cfg.validate();
    std::filesystem::create_directories(dir);
    save_encoder_config(dir / "encoder.json", cfg);
    for (int i = 0; i < cfg.layers; ++i) {
        write_tensor(dir / ("layer" + std::to_string(i) + "_kernel.ctf"),
                     weights.kernels[i]);
        write_tensor(dir / ("layer" + std::to_string(i) + "_bias.ctf"),
                     FeatureTensor({weights.biases[i].size()}, weights.biases[i]));
    }
}

EncoderWeights load_encoder_weights(const std::filesystem::path& dir,
                                    const EncoderConfig& cfg) {
    cfg.validate();
    EncoderWeights w;
    std::size_t c_in = static_cast<std::size_t>(cfg.in_channels);
    const std::size_t k = static_cast<std::size_t>(cfg.kernel_size);
    for (int i = 0; i < cfg.layers; ++i) {
        const std::size_t c_out = static_cast<std::size_t>(cfg.channels[i]);
        FeatureTensor kern =
            read_tensor(dir / ("layer" + std::to_string(i) + "_kernel.ctf"));
        if (kern.dims != std::vector<std::size_t>{c_out, c_in, k, k})
            throw ShapeError(dir.string() + ": layer " + std::to_string(i) +
                             " kernel dims do not match config");
        FeatureTensor bias =
            read_tensor(dir / ("layer" + std::to_string(i) + "_bias.ctf"));
        if (bias.ndim() != 1 || bias.dims[0] != c_out)
            throw ShapeError(dir.string() + ": layer " + std::to_string(i) +
                             " bias dims do not match config");
        w.kernels.push_back(std::move(kern));
        w.biases.push_back(std::move(bias.data));
        c_in = c_out;
    }
    return w;
}

}  // namespace cact
