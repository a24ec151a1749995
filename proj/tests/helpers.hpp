#pragma once

// Shared test utilities. The oracles here are deliberately written as
// plain nested loops, independent of the library's optimized paths.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "s2d/keypoint_extractor.hpp"
#include "s2d/rng.hpp"
#include "s2d/tensor.hpp"

namespace testutil {

inline s2d::Tensor random_tensor(std::vector<int> shape, s2d::Rng& rng, float lo = -1.0f,
                                 float hi = 1.0f) {
    s2d::Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline s2d::KeypointSet random_keypoints(int count, s2d::Rng& rng) {
    s2d::KeypointSet kps;
    kps.points.resize(static_cast<std::size_t>(count));
    for (auto& p : kps.points) {
        p = {rng.uniform(-1.0f, 1.0f), rng.uniform(-1.0f, 1.0f), rng.uniform(-1.0f, 1.0f)};
    }
    return kps;
}

// Gradient background with a bright blob moving on an ellipse; a cheap
// deterministic stand-in for a person moving against a static scene.
inline s2d::Tensor synthetic_frame(int h, int w, double t) {
    s2d::Tensor f({3, h, w});
    const double cx = 0.5 + 0.25 * std::sin(6.2831853 * t);
    const double cy = 0.5 + 0.20 * std::cos(6.2831853 * t);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5) / w, v = (y + 0.5) / h;
            const double d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
            const double blob = std::exp(-d2 / 0.01);
            f.at({0, y, x}) = static_cast<float>(std::min(1.0, 0.15 + 0.3 * u + 0.7 * blob));
            f.at({1, y, x}) = static_cast<float>(std::min(1.0, 0.2 + 0.3 * v + 0.5 * blob));
            f.at({2, y, x}) = static_cast<float>(std::min(1.0, 0.35 + 0.4 * blob));
        }
    }
    return f;
}

inline double max_abs_diff(const s2d::Tensor& a, const s2d::Tensor& b) {
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return worst;
}

inline bool bit_identical(const s2d::Tensor& a, const s2d::Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
    }
    return true;
}

// Nested-loop cross-correlation, double accumulation throughout.
inline s2d::Tensor conv2d_oracle(const s2d::Tensor& input, const s2d::Tensor& weights,
                                 const s2d::Tensor& bias, int stride, int padding) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int K = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;
    s2d::Tensor out({K, Ho, Wo});
    for (int k = 0; k < K; ++k) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = bias[k];
                for (int c = 0; c < C; ++c) {
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride - padding + ky;
                            const int ix = ox * stride - padding + kx;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += static_cast<double>(weights.at({k, c, ky, kx})) *
                                   input.at({c, iy, ix});
                        }
                    }
                }
                out.at({k, oy, ox}) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

// Explicit-summation fully connected oracle.
inline s2d::Tensor linear_oracle(const s2d::Tensor& input, const s2d::Tensor& weights,
                                 const s2d::Tensor& bias) {
    const int M = weights.dim(0), N = weights.dim(1);
    s2d::Tensor out({M});
    for (int m = 0; m < M; ++m) {
        double acc = bias[m];
        for (int n = 0; n < N; ++n) acc += static_cast<double>(weights.at({m, n})) * input[n];
        out[m] = static_cast<float>(acc);
    }
    return out;
}

// Per-cell interpolation oracle implementing the documented sampling
// semantics (normalized centers at (2i+1)/S - 1, border clamp, 1e-4 lattice
// snap) directly from the definition.
inline double sample_axis_oracle(double coord, int size, int* lo, int* hi) {
    double u = 0.5 * ((coord + 1.0) * size - 1.0);
    const double r = std::nearbyint(u);
    if (std::abs(u - r) <= 1e-4) u = r;
    const double fl = std::floor(u);
    *lo = std::clamp(static_cast<int>(fl), 0, size - 1);
    *hi = std::clamp(static_cast<int>(fl) + 1, 0, size - 1);
    return u - fl;
}

inline s2d::Tensor grid_sample_planar_oracle(const s2d::Tensor& input, const s2d::Tensor& grid) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    s2d::Tensor out({C, H, W});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            int x0, x1, y0, y1;
            const double tx = sample_axis_oracle(grid.at({y, x, 0}), W, &x0, &x1);
            const double ty = sample_axis_oracle(grid.at({y, x, 1}), H, &y0, &y1);
            for (int c = 0; c < C; ++c) {
                const double top = (1.0 - tx) * input.at({c, y0, x0}) + tx * input.at({c, y0, x1});
                const double bot = (1.0 - tx) * input.at({c, y1, x0}) + tx * input.at({c, y1, x1});
                out.at({c, y, x}) = static_cast<float>((1.0 - ty) * top + ty * bot);
            }
        }
    }
    return out;
}

inline s2d::Tensor grid_sample_volume_oracle(const s2d::Tensor& input, const s2d::Tensor& grid) {
    const int C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
    s2d::Tensor out({C, D, H, W});
    for (int z = 0; z < D; ++z) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                int x0, x1, y0, y1, z0, z1;
                const double tx = sample_axis_oracle(grid.at({z, y, x, 0}), W, &x0, &x1);
                const double ty = sample_axis_oracle(grid.at({z, y, x, 1}), H, &y0, &y1);
                const double tz = sample_axis_oracle(grid.at({z, y, x, 2}), D, &z0, &z1);
                for (int c = 0; c < C; ++c) {
                    auto v = [&](int zz, int yy, int xx) {
                        return static_cast<double>(input.at({c, zz, yy, xx}));
                    };
                    const double i00 = (1 - tx) * v(z0, y0, x0) + tx * v(z0, y0, x1);
                    const double i01 = (1 - tx) * v(z0, y1, x0) + tx * v(z0, y1, x1);
                    const double i10 = (1 - tx) * v(z1, y0, x0) + tx * v(z1, y0, x1);
                    const double i11 = (1 - tx) * v(z1, y1, x0) + tx * v(z1, y1, x1);
                    const double i0 = (1 - ty) * i00 + ty * i01;
                    const double i1 = (1 - ty) * i10 + ty * i11;
                    out.at({c, z, y, x}) = static_cast<float>((1 - tz) * i0 + tz * i1);
                }
            }
        }
    }
    return out;
}

}  // namespace testutil
