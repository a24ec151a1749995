#pragma once

// Small encoder/decoder network with skip connections, shared by the
// keypoint extractor and the dense-motion predictor. Channel widths double
// per encoder level; decoder levels upsample, concatenate the matching skip
// and convolve back down. All convolutions are 3x3, stride 1, padding 1.

#include <string>
#include <utility>
#include <vector>

#include "s2d/tensor.hpp"
#include "s2d/weights.hpp"

namespace s2d {

struct UNetSpec {
    std::string prefix;  // weight-name prefix, e.g. "kp."
    int in_channels = 3;
    int base_channels = 16;
    int levels = 3;
};

namespace detail {

inline Tensor conv3x3(const Tensor& x, const WeightMap& w, const std::string& name,
                      int in_ch, int out_ch) {
    const Tensor& k = fetch_weight(w, name + ".w", {out_ch, in_ch, 3, 3});
    const Tensor& b = fetch_weight(w, name + ".b", {out_ch});
    return conv2d(x, k, b, 1, 1);
}

}  // namespace detail

// Every tensor the topology requires, as (name, shape) pairs.
inline std::vector<std::pair<std::string, std::vector<int>>> unet_weight_shapes(const UNetSpec& s) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    auto conv = [&out](const std::string& name, int out_ch, int in_ch) {
        out.emplace_back(name + ".w", std::vector<int>{out_ch, in_ch, 3, 3});
        out.emplace_back(name + ".b", std::vector<int>{out_ch});
    };
    conv(s.prefix + "enc0", s.base_channels, s.in_channels);
    for (int l = 1; l <= s.levels; ++l) {
        conv(s.prefix + "down" + std::to_string(l), s.base_channels << l, s.base_channels << (l - 1));
    }
    for (int l = s.levels; l >= 1; --l) {
        const int skip = s.base_channels << (l - 1);
        conv(s.prefix + "up" + std::to_string(l), skip, (s.base_channels << l) + skip);
    }
    return out;
}

// Decoder output feature, [base_channels, H, W]. H and W must be divisible
// by 2^levels.
inline Tensor unet_feature(const Tensor& input, const WeightMap& w, const UNetSpec& s) {
    if (input.rank() != 3) {
        throw ShapeError(detail::msg("unet ", s.prefix, ": input rank ", input.rank(), ", want 3"));
    }
    if (input.dim(0) != s.in_channels) {
        throw ShapeError(detail::msg("unet ", s.prefix, ": input channels ", input.dim(0),
                                     ", configured ", s.in_channels));
    }
    const int div = 1 << s.levels;
    if (input.dim(1) % div != 0 || input.dim(2) % div != 0) {
        throw ShapeError(detail::msg("unet ", s.prefix, ": spatial size ", input.dim(1), "x",
                                     input.dim(2), " not divisible by ", div));
    }

    std::vector<Tensor> skips;
    skips.reserve(static_cast<std::size_t>(s.levels));
    Tensor x = relu(detail::conv3x3(input, w, s.prefix + "enc0", s.in_channels, s.base_channels));
    for (int l = 1; l <= s.levels; ++l) {
        skips.push_back(x);
        x = relu(detail::conv3x3(avg_pool2x2(x), w, s.prefix + "down" + std::to_string(l),
                                 s.base_channels << (l - 1), s.base_channels << l));
    }
    for (int l = s.levels; l >= 1; --l) {
        const Tensor& skip = skips[static_cast<std::size_t>(l - 1)];
        Tensor up = concat_channels(upsample_nearest2x(x), skip);
        x = relu(detail::conv3x3(up, w, s.prefix + "up" + std::to_string(l),
                                 (s.base_channels << l) + (s.base_channels << (l - 1)),
                                 s.base_channels << (l - 1)));
    }
    return x;
}

}  // namespace s2d
