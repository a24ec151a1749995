#pragma once

// From a (reference, inter) keypoint pair to dense motion: per-keypoint
// constant-displacement warp candidates plus a background identity field,
// Gaussian heatmap differences as spatial guidance, a mask/occlusion
// predictor, and the per-cell convex combination that yields the final
// flow. Candidate fields are backward warps: they say where in the
// reference to sample for every inter-frame cell.

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "s2d/keypoint_extractor.hpp"
#include "s2d/tensor.hpp"
#include "s2d/unet.hpp"
#include "s2d/weights.hpp"

namespace s2d {

struct GridShape {
    int d = 4;
    int h = 0;
    int w = 0;
};

// K+1 warp candidates, [K+1, D, H, W, 3]. Candidate 0 is the identity grid.
struct SparseMotionField {
    Tensor candidates;

    int candidate_count() const { return candidates.dim(0); }
};

struct DenseMotion {
    Tensor mask;       // [K+1, D, H, W], sums to 1 over candidates at every cell
    Tensor occlusion;  // [1, H, W], values in [0, 1]
};

struct MotionConfig {
    int base_channels = 16;
    int levels = 3;

    UNetSpec unet(int in_channels) const { return UNetSpec{"motion.", in_channels, base_channels, levels}; }
};

// H_k(p) = exp(-|grid(p) - kp_k|^2 / (2 sigma2)); unit peak when a keypoint
// sits exactly on a cell center.
inline Tensor gaussian_heatmap(const KeypointSet& kps, const GridShape& grid, float sigma2) {
    if (!(sigma2 > 0.0f)) throw ShapeError(detail::msg("gaussian_heatmap: sigma2 ", sigma2, " <= 0"));
    const int K = kps.count(), D = grid.d, H = grid.h, W = grid.w;
    Tensor out({K, D, H, W});
    const double inv = 1.0 / (2.0 * static_cast<double>(sigma2));
    float* p = out.data();
    for (int k = 0; k < K; ++k) {
        const double kx = kps.points[static_cast<std::size_t>(k)][0];
        const double ky = kps.points[static_cast<std::size_t>(k)][1];
        const double kz = kps.points[static_cast<std::size_t>(k)][2];
        for (int z = 0; z < D; ++z) {
            const double dz = cell_center(z, D) - kz;
            for (int y = 0; y < H; ++y) {
                const double dy = cell_center(y, H) - ky;
                for (int x = 0; x < W; ++x) {
                    const double dx = cell_center(x, W) - kx;
                    *p++ = static_cast<float>(std::exp(-(dx * dx + dy * dy + dz * dz) * inv));
                }
            }
        }
    }
    return out;
}

// Spatial guidance tensor: heatmap(inter) - heatmap(reference), per cell.
inline Tensor heatmap_difference(const KeypointSet& kp_ref, const KeypointSet& kp_inter,
                                 const GridShape& grid, float sigma2) {
    if (kp_ref.count() != kp_inter.count()) {
        throw ShapeError(detail::msg("heatmap_difference: keypoint count ", kp_ref.count(), " vs ",
                                     kp_inter.count()));
    }
    Tensor a = gaussian_heatmap(kp_inter, grid, sigma2);
    const Tensor b = gaussian_heatmap(kp_ref, grid, sigma2);
    for (std::int64_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

// Candidate 0 is the identity grid; candidate k adds the constant
// displacement kp_ref[k] - kp_inter[k] everywhere.
inline SparseMotionField sparse_motion(const KeypointSet& kp_ref, const KeypointSet& kp_inter,
                                       const GridShape& grid) {
    if (kp_ref.count() != kp_inter.count()) {
        throw ShapeError(detail::msg("sparse_motion: keypoint count ", kp_ref.count(), " vs ",
                                     kp_inter.count()));
    }
    const int K = kp_ref.count(), D = grid.d, H = grid.h, W = grid.w;
    const SampleGrid identity = SampleGrid::identity(D, H, W);
    const std::int64_t cells = static_cast<std::int64_t>(D) * H * W;

    SparseMotionField field;
    field.candidates = Tensor({K + 1, D, H, W, 3});
    float* out = field.candidates.data();
    if (identity.planar()) {
        // D == 1: expand the planar identity to (x, y, 0) triples.
        const float* id = identity.coords.data();
        for (std::int64_t i = 0; i < cells; ++i) {
            out[3 * i] = id[2 * i];
            out[3 * i + 1] = id[2 * i + 1];
            out[3 * i + 2] = 0.0f;
        }
    } else {
        std::copy(identity.coords.data(), identity.coords.data() + 3 * cells, out);
    }
    for (int k = 0; k < K; ++k) {
        float disp[3];
        for (int a = 0; a < 3; ++a) {
            disp[a] = kp_ref.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] -
                      kp_inter.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)];
        }
        float* dst = out + static_cast<std::int64_t>(k + 1) * cells * 3;
        for (std::int64_t i = 0; i < cells; ++i) {
            dst[3 * i] = out[3 * i] + disp[0];
            dst[3 * i + 1] = out[3 * i + 1] + disp[1];
            dst[3 * i + 2] = out[3 * i + 2] + disp[2];
        }
    }
    return field;
}

// Warp the texture with every candidate field; results concatenate along
// the channel axis in candidate order: [(K+1)*C, D, H, W].
inline Tensor coarse_deform(const Tensor& texture, const SparseMotionField& sparse) {
    if (texture.rank() != 4) {
        throw ShapeError(detail::msg("coarse_deform: texture rank ", texture.rank(), ", want 4"));
    }
    const int Kp1 = sparse.candidates.dim(0);
    const int D = sparse.candidates.dim(1), H = sparse.candidates.dim(2), W = sparse.candidates.dim(3);
    const int C = texture.dim(0);
    Tensor out({Kp1 * C, D, H, W});
    const std::int64_t cand_size = static_cast<std::int64_t>(D) * H * W * 3;
    const std::int64_t block = static_cast<std::int64_t>(C) * D * H * W;
    for (int k = 0; k < Kp1; ++k) {
        Tensor grid = Tensor::from_data(
            {D, H, W, 3},
            std::vector<float>(sparse.candidates.data() + k * cand_size,
                               sparse.candidates.data() + (k + 1) * cand_size));
        const Tensor warped = grid_sample(texture, grid);
        std::copy(warped.data(), warped.data() + block, out.data() + k * block);
    }
    return out;
}

inline std::vector<std::pair<std::string, std::vector<int>>> motion_weight_shapes(
    const MotionConfig& cfg, int keypoints, int coarse_channels, int depth) {
    const int in_channels = (keypoints + coarse_channels) * depth;
    auto out = unet_weight_shapes(cfg.unet(in_channels));
    out.emplace_back("motion.mask.w",
                     std::vector<int>{(keypoints + 1) * depth, cfg.base_channels, 3, 3});
    out.emplace_back("motion.mask.b", std::vector<int>{(keypoints + 1) * depth});
    out.emplace_back("motion.occ.w", std::vector<int>{1, cfg.base_channels, 3, 3});
    out.emplace_back("motion.occ.b", std::vector<int>{1});
    return out;
}

// Mask/occlusion prediction: the heatmap difference and the coarse deformed
// feature concatenate (depth folded into channels), run through the
// encoder/decoder network, and split into two heads. The mask head softmaxes
// over the candidate axis; the occlusion head is a planar sigmoid.
inline DenseMotion dense_motion(const Tensor& diff, const Tensor& coarse, const WeightMap& weights,
                                const MotionConfig& cfg) {
    if (diff.rank() != 4 || coarse.rank() != 4) {
        throw ShapeError(detail::msg("dense_motion: diff rank ", diff.rank(), ", coarse rank ",
                                     coarse.rank(), ", want 4"));
    }
    for (int a = 1; a < 4; ++a) {
        if (diff.dim(a) != coarse.dim(a)) {
            throw ShapeError(detail::msg("dense_motion: axis ", a, " mismatch, diff ", shape_str(diff),
                                         " vs coarse ", shape_str(coarse)));
        }
    }
    const int K = diff.dim(0), D = diff.dim(1), H = diff.dim(2), W = diff.dim(3);
    const Tensor stacked = concat_channels(diff, coarse);
    const Tensor folded = stacked.reshaped({stacked.dim(0) * D, H, W});
    const Tensor feat = unet_feature(folded, weights, cfg.unet(folded.dim(0)));

    const Tensor mask_logits = detail::conv3x3(feat, weights, "motion.mask", cfg.base_channels,
                                               (K + 1) * D);
    const Tensor occ_logits = detail::conv3x3(feat, weights, "motion.occ", cfg.base_channels, 1);

    DenseMotion out;
    out.mask = softmax_axis(mask_logits.reshaped({K + 1, D, H, W}), 0);
    out.occlusion = sigmoid(occ_logits);
    return out;
}

// Debug dump for harness diffing: raw little-endian f32 values at `path`
// and a JSON shape sidecar at `path`.json.
inline void dump_raw_plane(const std::string& path, const Tensor& t) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(static_cast<std::size_t>(4 * t.size()));
    for (std::int64_t i = 0; i < t.size(); ++i) detail::put_f32(bytes, t[i]);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(detail::msg("cannot open ", path, " for writing"));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

    std::ofstream j(path + ".json");
    if (!j) throw ParseError(detail::msg("cannot open ", path, ".json for writing"));
    j << "{\"dtype\":\"f32\",\"shape\":[";
    for (int a = 0; a < t.rank(); ++a) j << (a ? "," : "") << t.dim(a);
    j << "]}\n";
}

// flow(p) = sum_k mask[k](p) * candidates[k](p): a per-cell convex
// combination of candidate coordinates. [D, H, W, 3].
inline Tensor compose_flow(const Tensor& mask, const SparseMotionField& sparse) {
    if (mask.rank() != 4) {
        throw ShapeError(detail::msg("compose_flow: mask rank ", mask.rank(), ", want 4"));
    }
    const int Kp1 = mask.dim(0), D = mask.dim(1), H = mask.dim(2), W = mask.dim(3);
    if (sparse.candidates.dim(0) != Kp1 || sparse.candidates.dim(1) != D ||
        sparse.candidates.dim(2) != H || sparse.candidates.dim(3) != W) {
        throw ShapeError(detail::msg("compose_flow: mask ", shape_str(mask), " vs candidates ",
                                     shape_str(sparse.candidates)));
    }
    Tensor out({D, H, W, 3});
    const std::int64_t cells = static_cast<std::int64_t>(D) * H * W;
    for (std::int64_t i = 0; i < cells; ++i) {
        double acc[3] = {0.0, 0.0, 0.0};
        for (int k = 0; k < Kp1; ++k) {
            const double m = mask[k * cells + i];
            const float* c = sparse.candidates.data() + (k * cells + i) * 3;
            acc[0] += m * c[0];
            acc[1] += m * c[1];
            acc[2] += m * c[2];
        }
        out[3 * i] = static_cast<float>(acc[0]);
        out[3 * i + 1] = static_cast<float>(acc[1]);
        out[3 * i + 2] = static_cast<float>(acc[2]);
    }
    return out;
}

}  // namespace s2d
