#pragma once

// Frame -> 15 normalized 3D keypoints: block-average downsampling, a small
// encoder/decoder network producing K*D heatmap channels, then a soft
// grid-summation that turns each normalized heatmap volume into the
// expectation of the cell-center coordinates. Every extracted coordinate is
// a convex combination of grid centers and therefore lies in [-1, 1].

#include <array>
#include <vector>

#include "s2d/tensor.hpp"
#include "s2d/unet.hpp"
#include "s2d/weights.hpp"

namespace s2d {

struct KeypointSet {
    std::vector<std::array<float, 3>> points;  // (x, y, z), each in [-1, 1]

    int count() const { return static_cast<int>(points.size()); }
};

struct ExtractorConfig {
    int keypoints = 15;      // K
    int depth = 4;           // D, heatmap depth axis
    int scale = 2;           // s, frame downsampling factor
    int levels = 3;          // encoder/decoder levels
    int base_channels = 16;

    UNetSpec unet() const { return UNetSpec{"kp.", 3, base_channels, levels}; }
};

inline std::vector<std::pair<std::string, std::vector<int>>> extractor_weight_shapes(
    const ExtractorConfig& cfg) {
    auto out = unet_weight_shapes(cfg.unet());
    out.emplace_back("kp.head.w", std::vector<int>{cfg.keypoints * cfg.depth, cfg.base_channels, 3, 3});
    out.emplace_back("kp.head.b", std::vector<int>{cfg.keypoints * cfg.depth});
    return out;
}

// s x s block average per channel; s must divide both spatial dimensions.
inline Tensor downsample_frame(const Tensor& frame, int s) {
    if (frame.rank() != 3) {
        throw ShapeError(detail::msg("downsample_frame: input rank ", frame.rank(), ", want 3"));
    }
    if (s < 1) throw ShapeError(detail::msg("downsample_frame: scale ", s, " < 1"));
    const int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    if (H % s != 0) throw ShapeError(detail::msg("downsample_frame: height ", H, " not divisible by ", s));
    if (W % s != 0) throw ShapeError(detail::msg("downsample_frame: width ", W, " not divisible by ", s));
    if (s == 1) return frame;
    const int Ho = H / s, Wo = W / s;
    Tensor out({C, Ho, Wo});
    const double inv = 1.0 / (static_cast<double>(s) * s);
    for (int c = 0; c < C; ++c) {
        const float* in_c = frame.data() + static_cast<std::int64_t>(c) * H * W;
        float* out_c = out.data() + static_cast<std::int64_t>(c) * Ho * Wo;
        for (int y = 0; y < Ho; ++y) {
            for (int x = 0; x < Wo; ++x) {
                double acc = 0.0;
                for (int dy = 0; dy < s; ++dy) {
                    const float* row = in_c + static_cast<std::int64_t>(y * s + dy) * W + x * s;
                    for (int dx = 0; dx < s; ++dx) acc += row[dx];
                }
                out_c[y * Wo + x] = static_cast<float>(acc * inv);
            }
        }
    }
    return out;
}

// Raw heatmap logits [K, D, h, w] at the (already downsampled) frame
// resolution. The head's K*D channels are folded onto a depth axis of size D.
inline Tensor unet_forward(const Tensor& frame, const WeightMap& weights, const ExtractorConfig& cfg) {
    Tensor feat = unet_feature(frame, weights, cfg.unet());
    Tensor logits = detail::conv3x3(feat, weights, "kp.head", cfg.base_channels,
                                    cfg.keypoints * cfg.depth);
    return logits.reshaped({cfg.keypoints, cfg.depth, frame.dim(1), frame.dim(2)});
}

// Per-keypoint softmax over all D*H*W cells; each heatmap volume sums to 1.
inline Tensor normalize_heatmaps(const Tensor& logits) {
    if (logits.rank() != 4) {
        throw ShapeError(detail::msg("normalize_heatmaps: logits rank ", logits.rank(), ", want 4"));
    }
    const int K = logits.dim(0);
    const std::int64_t cells = logits.size() / K;
    Tensor flat = logits.reshaped({K, static_cast<int>(cells)});
    return softmax_axis(flat, 1).reshaped(logits.shape());
}

// Soft grid summation: keypoint k is the probability-weighted mean of the
// normalized cell centers (x from width, y from height, z from depth).
inline KeypointSet heatmaps_to_keypoints(const Tensor& logits) {
    Tensor maps = normalize_heatmaps(logits);
    const int K = maps.dim(0), D = maps.dim(1), H = maps.dim(2), W = maps.dim(3);
    KeypointSet out;
    out.points.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const float* p = maps.data() + static_cast<std::int64_t>(k) * D * H * W;
        double sx = 0.0, sy = 0.0, sz = 0.0;
        for (int z = 0; z < D; ++z) {
            const double cz = cell_center(z, D);
            for (int y = 0; y < H; ++y) {
                const double cy = cell_center(y, H);
                for (int x = 0; x < W; ++x) {
                    const double v = *p++;
                    sx += v * cell_center(x, W);
                    sy += v * cy;
                    sz += v * cz;
                }
            }
        }
        out.points[static_cast<std::size_t>(k)] = {static_cast<float>(sx), static_cast<float>(sy),
                                                   static_cast<float>(sz)};
    }
    return out;
}

inline KeypointSet extract_keypoints(const Tensor& frame, int s, const WeightMap& weights,
                                     const ExtractorConfig& cfg) {
    return heatmaps_to_keypoints(unet_forward(downsample_frame(frame, s), weights, cfg));
}

}  // namespace s2d
