#pragma once

// Forward-only evaluation of the five training-objective terms and their
// weighted total. The functional forms here are documented substitutes
// chosen for testable fixed points; the combination weights are
// (10, 10, 10, 1, 100) applied in that order.

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "s2d/keypoint_extractor.hpp"
#include "s2d/synthesis.hpp"
#include "s2d/tensor.hpp"

namespace s2d {

inline constexpr double kLambdaEquivariance = 10.0;
inline constexpr double kLambdaKeypointPrior = 10.0;
inline constexpr double kLambdaPerceptual = 10.0;
inline constexpr double kLambdaAdversarial = 1.0;
inline constexpr double kLambdaVertex = 100.0;

// 2D spatial transform on normalized [-1, 1]^2 coordinates: an affine core
// (x', y') = A (x, y) + t, optionally followed by thin-plate radial terms
// sum_i w_i * U(|p - c_i|) with U(r) = r^2 log(r^2).
struct ThinPlateOrAffine {
    // Row-major 2x3 affine: {a, b, tx, c, d, ty}.
    std::array<double, 6> affine{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
    std::vector<std::array<double, 2>> centers;
    std::vector<std::array<double, 2>> radial_weights;

    static ThinPlateOrAffine identity() { return {}; }

    bool has_radial() const { return !centers.empty(); }
};

namespace detail {

inline std::array<double, 2> radial_displacement(const ThinPlateOrAffine& t, double x, double y) {
    std::array<double, 2> d{0.0, 0.0};
    for (std::size_t i = 0; i < t.centers.size(); ++i) {
        const double dx = x - t.centers[i][0];
        const double dy = y - t.centers[i][1];
        const double r2 = dx * dx + dy * dy;
        const double u = r2 > 0.0 ? r2 * std::log(r2) : 0.0;
        d[0] += t.radial_weights[i][0] * u;
        d[1] += t.radial_weights[i][1] * u;
    }
    return d;
}

}  // namespace detail

inline std::array<double, 2> transform_point(const ThinPlateOrAffine& t, double x, double y) {
    std::array<double, 2> out{t.affine[0] * x + t.affine[1] * y + t.affine[2],
                              t.affine[3] * x + t.affine[4] * y + t.affine[5]};
    if (t.has_radial()) {
        const auto d = detail::radial_displacement(t, x, y);
        out[0] += d[0];
        out[1] += d[1];
    }
    return out;
}

// Inverse mapping. Affine part closes in one step; radial terms are peeled
// off by fixed-point iteration, which converges for the mild warps the
// equivariance check uses. Failure to converge means the transform folds
// over itself on [-1, 1]^2 and is rejected as degenerate.
inline std::array<double, 2> invert_point(const ThinPlateOrAffine& t, double x, double y) {
    const double det = t.affine[0] * t.affine[4] - t.affine[1] * t.affine[3];
    if (std::abs(det) < 1e-12) throw ShapeError("degenerate transform: affine determinant ~ 0");
    const auto affine_inv = [&](double px, double py) {
        const double ux = px - t.affine[2];
        const double uy = py - t.affine[5];
        return std::array<double, 2>{(t.affine[4] * ux - t.affine[1] * uy) / det,
                                     (-t.affine[3] * ux + t.affine[0] * uy) / det};
    };
    if (!t.has_radial()) return affine_inv(x, y);
    std::array<double, 2> p = affine_inv(x, y);
    for (int it = 0; it < 64; ++it) {
        const auto d = detail::radial_displacement(t, p[0], p[1]);
        p = affine_inv(x - d[0], y - d[1]);
    }
    const auto check = transform_point(t, p[0], p[1]);
    if (std::abs(check[0] - x) > 1e-6 || std::abs(check[1] - y) > 1e-6) {
        throw ShapeError("degenerate transform: inverse iteration did not converge");
    }
    return p;
}

// Move the frame content by the transform: output cell p samples the input
// at T^{-1}(p), so a feature at location q reappears at T(q).
inline Tensor transform_frame(const Tensor& frame, const ThinPlateOrAffine& t) {
    if (frame.rank() != 3) {
        throw ShapeError(detail::msg("transform_frame: input rank ", frame.rank(), ", want 3"));
    }
    const int H = frame.dim(1), W = frame.dim(2);
    Tensor grid({H, W, 2});
    float* g = grid.data();
    for (int y = 0; y < H; ++y) {
        const double cy = cell_center(y, H);
        for (int x = 0; x < W; ++x) {
            const auto src = invert_point(t, cell_center(x, W), cy);
            *g++ = static_cast<float>(src[0]);
            *g++ = static_cast<float>(src[1]);
        }
    }
    return grid_sample(frame, grid);
}

// Mean absolute x/y difference between keypoints of the transformed frame
// and transformed keypoints of the original frame.
inline double equivariance_loss(const Tensor& frame, const ThinPlateOrAffine& t,
                                const WeightMap& weights, const ExtractorConfig& cfg) {
    const KeypointSet warped_kps = extract_keypoints(transform_frame(frame, t), cfg.scale, weights, cfg);
    const KeypointSet base_kps = extract_keypoints(frame, cfg.scale, weights, cfg);
    double acc = 0.0;
    for (int k = 0; k < base_kps.count(); ++k) {
        const auto mapped = transform_point(t, base_kps.points[static_cast<std::size_t>(k)][0],
                                            base_kps.points[static_cast<std::size_t>(k)][1]);
        acc += std::abs(warped_kps.points[static_cast<std::size_t>(k)][0] - mapped[0]);
        acc += std::abs(warped_kps.points[static_cast<std::size_t>(k)][1] - mapped[1]);
    }
    return acc / (2.0 * base_kps.count());
}

// Spread penalty sum_{i<j} max(0, 2*tau - |kp_i - kp_j|)^2 plus a squared
// mean-depth centering term. Zero when all pairs are at least 2*tau apart
// and the mean z is zero.
inline double keypoint_prior_loss(const KeypointSet& kps, double tau = 0.05) {
    double acc = 0.0;
    const std::size_t n = kps.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = static_cast<double>(kps.points[i][0]) - kps.points[j][0];
            const double dy = static_cast<double>(kps.points[i][1]) - kps.points[j][1];
            const double dz = static_cast<double>(kps.points[i][2]) - kps.points[j][2];
            const double gap = 2.0 * tau - std::sqrt(dx * dx + dy * dy + dz * dz);
            if (gap > 0.0) acc += gap * gap;
        }
    }
    double mz = 0.0;
    for (const auto& p : kps.points) mz += p[2];
    if (n > 0) mz /= static_cast<double>(n);
    return acc + mz * mz;
}

namespace detail {

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
    return acc / static_cast<double>(a.size());
}

}  // namespace detail

using FeatureHook = std::function<Tensor(const Tensor&)>;

// Multi-scale (1, 1/2, 1/4) mean absolute pixel difference; symmetric and
// zero iff the frames agree. When a feature hook is supplied the comparison
// runs once in that feature space instead.
inline double perceptual_loss(const Tensor& a, const Tensor& b, const FeatureHook& hook = nullptr) {
    if (!a.same_shape(b)) {
        throw ShapeError(detail::msg("perceptual_loss: shape ", shape_str(a), " vs ", shape_str(b)));
    }
    if (hook) {
        const Tensor fa = hook(a);
        const Tensor fb = hook(b);
        if (!fa.same_shape(fb)) {
            throw ShapeError(detail::msg("perceptual_loss: hook output shape ", shape_str(fa),
                                         " vs ", shape_str(fb)));
        }
        return detail::mean_abs_diff(fa, fb);
    }
    double acc = 0.0;
    for (int s : {1, 2, 4}) {
        acc += detail::mean_abs_diff(downsample_frame(a, s), downsample_frame(b, s));
    }
    return acc / 3.0;
}

// Generator-side least-squares value: mean((logits - 1)^2).
inline double adversarial_loss_value(const Tensor& fake_logits) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < fake_logits.size(); ++i) {
        const double d = static_cast<double>(fake_logits[i]) - 1.0;
        acc += d * d;
    }
    return fake_logits.size() > 0 ? acc / static_cast<double>(fake_logits.size()) : 0.0;
}

// Mean absolute coordinate difference over all 20950 values.
inline double vertex_loss(const VertexSet& pred, const VertexSet& ref) {
    if (!pred.coords.same_shape(ref.coords)) {
        throw ShapeError(detail::msg("vertex_loss: shape ", shape_str(pred.coords), " vs ",
                                     shape_str(ref.coords)));
    }
    return detail::mean_abs_diff(pred.coords, ref.coords);
}

struct LossBreakdown {
    double equ = 0.0;
    double kp = 0.0;
    double per = 0.0;
    double adv = 0.0;
    double ver = 0.0;
    double total = 0.0;
};

// total = 10*equ + 10*kp + 10*per + 1*adv + 100*ver, summed left to right in
// exactly that order.
inline LossBreakdown total_loss(double equ, double kp, double per, double adv, double ver) {
    for (double v : {equ, kp, per, adv, ver}) {
        if (!std::isfinite(v)) throw ShapeError("total_loss: non-finite term");
    }
    LossBreakdown b;
    b.equ = equ;
    b.kp = kp;
    b.per = per;
    b.adv = adv;
    b.ver = ver;
    b.total = kLambdaEquivariance * equ;
    b.total += kLambdaKeypointPrior * kp;
    b.total += kLambdaPerceptual * per;
    b.total += kLambdaAdversarial * adv;
    b.total += kLambdaVertex * ver;
    return b;
}

inline std::string loss_report_json(const LossBreakdown& b) {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "{\"equ\":%.17g,\"kp\":%.17g,\"per\":%.17g,\"adv\":%.17g,\"ver\":%.17g,"
                  "\"total\":%.17g}",
                  b.equ, b.kp, b.per, b.adv, b.ver, b.total);
    return buf;
}

}  // namespace s2d
