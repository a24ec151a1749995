#pragma once

// Dense row-major float32 tensors and the handful of forward-pass
// primitives the rest of the library is built from: convolution,
// fully-connected maps, axis softmax, pooling and grid-sample warping.
//
// Conventions used throughout:
//   * all arithmetic is float32, reductions accumulate in float64;
//   * normalized coordinates place the center of cell i on an axis of
//     size S at (2*i + 1) / S - 1, so the valid range is [-1, 1];
//   * every operation is a pure function of its inputs and is safe to
//     call concurrently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <utility>
#include <vector>

#include "s2d/error.hpp"

namespace s2d {

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, float fill = 0.0f)
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    static Tensor from_data(std::vector<int> shape, std::vector<float> data) {
        Tensor t;
        if (checked_size(shape) != static_cast<std::int64_t>(data.size())) {
            throw ShapeError(detail::msg("tensor data length ", data.size(),
                                         " does not match shape product ", checked_size(shape)));
        }
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    float at(std::initializer_list<int> idx) const { return data_[offset(idx)]; }
    float& at(std::initializer_list<int> idx) { return data_[offset(idx)]; }

    // Reshape preserves the flat data; the element count must not change.
    Tensor reshaped(std::vector<int> new_shape) const {
        if (checked_size(new_shape) != size()) {
            throw ShapeError(detail::msg("reshape from ", size(), " elements to shape product ",
                                         checked_size(new_shape)));
        }
        Tensor t;
        t.shape_ = std::move(new_shape);
        t.data_ = data_;
        return t;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    static std::int64_t checked_size(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError(detail::msg("non-positive dimension ", d, " in tensor shape"));
            n *= d;
        }
        return n;
    }

    std::size_t offset(std::initializer_list<int> idx) const {
        std::size_t off = 0;
        std::size_t axis = 0;
        for (int i : idx) {
            off = off * static_cast<std::size_t>(shape_[axis]) + static_cast<std::size_t>(i);
            ++axis;
        }
        return off;
    }

    std::vector<int> shape_;
    std::vector<float> data_;
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "[";
    for (int i = 0; i < t.rank(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.dim(i));
    }
    return s + "]";
}

// Center of cell i on an axis of size n, in normalized [-1, 1] coordinates.
inline float cell_center(int i, int n) {
    return static_cast<float>((2.0 * i + 1.0) / n - 1.0);
}

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& a) {
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0f ? out[i] : 0.0f;
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(out[i]))));
    }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError(detail::msg("add: shape ", shape_str(a), " vs ", shape_str(b)));
    }
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

// Hadamard product. Shapes must match, except that a factor whose leading
// dimension is 1 (e.g. a [1,H,W] confidence map) multiplies every leading
// slice of the other operand.
inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.same_shape(b)) {
        Tensor out = a;
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
        return out;
    }
    const Tensor* full = nullptr;
    const Tensor* bcast = nullptr;
    if (a.rank() == b.rank() && a.rank() >= 1) {
        if (a.dim(0) == 1) { full = &b; bcast = &a; }
        else if (b.dim(0) == 1) { full = &a; bcast = &b; }
    }
    if (full != nullptr) {
        bool tail_ok = true;
        for (int ax = 1; ax < full->rank(); ++ax) tail_ok = tail_ok && full->dim(ax) == bcast->dim(ax);
        if (tail_ok) {
            Tensor out = *full;
            const std::int64_t plane = bcast->size();
            for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= (*bcast)[i % plane];
            return out;
        }
    }
    throw ShapeError(detail::msg("hadamard: shape ", shape_str(a), " vs ", shape_str(b)));
}

// Concatenation along axis 0; all trailing dimensions must agree.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1) {
        throw ShapeError(detail::msg("concat_channels: rank ", a.rank(), " vs ", b.rank()));
    }
    for (int ax = 1; ax < a.rank(); ++ax) {
        if (a.dim(ax) != b.dim(ax)) {
            throw ShapeError(detail::msg("concat_channels: axis ", ax, " mismatch, ",
                                         shape_str(a), " vs ", shape_str(b)));
        }
    }
    std::vector<int> shape = a.shape();
    shape[0] += b.dim(0);
    Tensor out(shape);
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

enum class Elementwise { Relu, Sigmoid, Hadamard, Add, ConcatChannels };

inline Tensor elementwise(const Tensor& a, const Tensor* b, Elementwise kind) {
    switch (kind) {
        case Elementwise::Relu: return relu(a);
        case Elementwise::Sigmoid: return sigmoid(a);
        case Elementwise::Hadamard: break;
        case Elementwise::Add: break;
        case Elementwise::ConcatChannels: break;
    }
    if (b == nullptr) throw ShapeError("elementwise: binary kind requires a second operand");
    switch (kind) {
        case Elementwise::Hadamard: return hadamard(a, *b);
        case Elementwise::Add: return add(a, *b);
        default: return concat_channels(a, *b);
    }
}

// ---------------------------------------------------------------------------
// Convolution, linear map, softmax, pooling
// ---------------------------------------------------------------------------

// 2D cross-correlation. input [C,H,W], weights [K,C,kh,kw], bias [K].
// Output height is (H + 2*padding - kh) / stride + 1 and must divide evenly.
inline Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     int stride = 1, int padding = 0) {
    if (input.rank() != 3) throw ShapeError(detail::msg("conv2d: input rank ", input.rank(), ", want 3"));
    if (weights.rank() != 4) throw ShapeError(detail::msg("conv2d: weight rank ", weights.rank(), ", want 4"));
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int K = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    if (weights.dim(1) != C) {
        throw ShapeError(detail::msg("conv2d: weight input channels ", weights.dim(1), " vs input ", C));
    }
    if (bias.rank() != 1 || bias.dim(0) != K) {
        throw ShapeError(detail::msg("conv2d: bias shape ", shape_str(bias), ", want [", K, "]"));
    }
    if (stride < 1) throw ShapeError(detail::msg("conv2d: stride ", stride, " < 1"));
    if (padding < 0) throw ShapeError(detail::msg("conv2d: padding ", padding, " < 0"));
    if (H + 2 * padding < kh || W + 2 * padding < kw) {
        throw ShapeError(detail::msg("conv2d: kernel ", kh, "x", kw, " does not fit padded input ",
                                     H + 2 * padding, "x", W + 2 * padding));
    }
    if ((H + 2 * padding - kh) % stride != 0) {
        throw ShapeError(detail::msg("conv2d: non-integer output height, H=", H, " pad=", padding,
                                     " kh=", kh, " stride=", stride));
    }
    if ((W + 2 * padding - kw) % stride != 0) {
        throw ShapeError(detail::msg("conv2d: non-integer output width, W=", W, " pad=", padding,
                                     " kw=", kw, " stride=", stride));
    }
    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;

    Tensor out({K, Ho, Wo});
    std::vector<double> acc(static_cast<std::size_t>(Ho) * Wo);
    const float* in = input.data();
    const float* wt = weights.data();

    for (int k = 0; k < K; ++k) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(bias[k]));
        for (int c = 0; c < C; ++c) {
            const float* in_c = in + static_cast<std::int64_t>(c) * H * W;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double w = wt[((static_cast<std::int64_t>(k) * C + c) * kh + ky) * kw + kx];
                    if (w == 0.0) continue;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= H) continue;
                        const float* row = in_c + static_cast<std::int64_t>(iy) * W;
                        double* arow = acc.data() + static_cast<std::int64_t>(oy) * Wo;
                        if (stride == 1) {
                            const int shift = kx - padding;
                            const int ox0 = std::max(0, -shift);
                            const int ox1 = std::min(Wo, W - shift);
                            for (int ox = ox0; ox < ox1; ++ox) arow[ox] += w * row[ox + shift];
                        } else {
                            for (int ox = 0; ox < Wo; ++ox) {
                                const int ix = ox * stride - padding + kx;
                                if (ix >= 0 && ix < W) arow[ox] += w * row[ix];
                            }
                        }
                    }
                }
            }
        }
        float* orow = out.data() + static_cast<std::int64_t>(k) * Ho * Wo;
        for (std::size_t i = 0; i < acc.size(); ++i) orow[i] = static_cast<float>(acc[i]);
    }
    return out;
}

// Fully connected map: out[m] = bias[m] + sum_n weights[m,n] * input[n].
inline Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 1) throw ShapeError(detail::msg("linear: input rank ", input.rank(), ", want 1"));
    if (weights.rank() != 2) throw ShapeError(detail::msg("linear: weight rank ", weights.rank(), ", want 2"));
    const int M = weights.dim(0), N = weights.dim(1);
    if (input.dim(0) != N) {
        throw ShapeError(detail::msg("linear: input length ", input.dim(0), " vs weight columns ", N));
    }
    if (bias.rank() != 1 || bias.dim(0) != M) {
        throw ShapeError(detail::msg("linear: bias shape ", shape_str(bias), ", want [", M, "]"));
    }
    Tensor out({M});
    for (int m = 0; m < M; ++m) {
        double acc = bias[m];
        const float* wrow = weights.data() + static_cast<std::int64_t>(m) * N;
        for (int n = 0; n < N; ++n) acc += static_cast<double>(wrow[n]) * input[n];
        out[m] = static_cast<float>(acc);
    }
    return out;
}

// Softmax along one axis, with the per-slice maximum subtracted before
// exponentiation so arbitrarily large logits stay finite.
inline Tensor softmax_axis(const Tensor& input, int axis) {
    if (axis < 0 || axis >= input.rank()) {
        throw ShapeError(detail::msg("softmax_axis: axis ", axis, " out of range for rank ", input.rank()));
    }
    std::int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= input.dim(a);
    for (int a = axis + 1; a < input.rank(); ++a) inner *= input.dim(a);
    const int n = input.dim(axis);

    Tensor out = input;
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t i = 0; i < inner; ++i) {
            float* base = out.data() + (o * n) * inner + i;
            float mx = base[0];
            for (int j = 1; j < n; ++j) mx = std::max(mx, base[static_cast<std::int64_t>(j) * inner]);
            double sum = 0.0;
            for (int j = 0; j < n; ++j) {
                const double e = std::exp(static_cast<double>(base[static_cast<std::int64_t>(j) * inner]) - mx);
                base[static_cast<std::int64_t>(j) * inner] = static_cast<float>(e);
                sum += e;
            }
            for (int j = 0; j < n; ++j) {
                base[static_cast<std::int64_t>(j) * inner] =
                    static_cast<float>(base[static_cast<std::int64_t>(j) * inner] / sum);
            }
        }
    }
    return out;
}

// Adaptive average pool to 1x1: per-channel spatial mean. input [C,H,W] -> [C].
inline Tensor reduce_pool_adaptive(const Tensor& input) {
    if (input.rank() != 3) {
        throw ShapeError(detail::msg("reduce_pool_adaptive: input rank ", input.rank(), ", want 3"));
    }
    const int C = input.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(input.dim(1)) * input.dim(2);
    Tensor out({C});
    for (int c = 0; c < C; ++c) {
        const float* p = input.data() + c * plane;
        double acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
        out[c] = static_cast<float>(acc / static_cast<double>(plane));
    }
    return out;
}

// 2x2 average pooling with stride 2. input [C,H,W], H and W even.
inline Tensor avg_pool2x2(const Tensor& input) {
    if (input.rank() != 3) throw ShapeError(detail::msg("avg_pool2x2: input rank ", input.rank(), ", want 3"));
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (H % 2 != 0 || W % 2 != 0) {
        throw ShapeError(detail::msg("avg_pool2x2: odd spatial size ", H, "x", W));
    }
    Tensor out({C, H / 2, W / 2});
    for (int c = 0; c < C; ++c) {
        const float* in_c = input.data() + static_cast<std::int64_t>(c) * H * W;
        float* out_c = out.data() + static_cast<std::int64_t>(c) * (H / 2) * (W / 2);
        for (int y = 0; y < H / 2; ++y) {
            for (int x = 0; x < W / 2; ++x) {
                const double s = static_cast<double>(in_c[(2 * y) * W + 2 * x]) +
                                 in_c[(2 * y) * W + 2 * x + 1] +
                                 in_c[(2 * y + 1) * W + 2 * x] +
                                 in_c[(2 * y + 1) * W + 2 * x + 1];
                out_c[y * (W / 2) + x] = static_cast<float>(s * 0.25);
            }
        }
    }
    return out;
}

// Nearest-neighbour 2x upsampling. input [C,H,W] -> [C,2H,2W].
inline Tensor upsample_nearest2x(const Tensor& input) {
    if (input.rank() != 3) {
        throw ShapeError(detail::msg("upsample_nearest2x: input rank ", input.rank(), ", want 3"));
    }
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c) {
        const float* in_c = input.data() + static_cast<std::int64_t>(c) * H * W;
        float* out_c = out.data() + static_cast<std::int64_t>(c) * 4 * H * W;
        for (int y = 0; y < 2 * H; ++y) {
            const float* row = in_c + static_cast<std::int64_t>(y / 2) * W;
            float* orow = out_c + static_cast<std::int64_t>(y) * 2 * W;
            for (int x = 0; x < 2 * W; ++x) orow[x] = row[x / 2];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid sampling
// ---------------------------------------------------------------------------

// A normalized sampling grid: [D,H,W,3] with coordinates ordered (x,y,z),
// or [H,W,2] ordered (x,y) for planar grids. The identity grid maps every
// cell to its own normalized center.
struct SampleGrid {
    Tensor coords;

    bool planar() const { return coords.rank() == 3; }

    static SampleGrid identity(int d, int h, int w) {
        if (d == 1) return identity_planar(h, w);
        SampleGrid g;
        g.coords = Tensor({d, h, w, 3});
        float* p = g.coords.data();
        for (int z = 0; z < d; ++z) {
            const float cz = cell_center(z, d);
            for (int y = 0; y < h; ++y) {
                const float cy = cell_center(y, h);
                for (int x = 0; x < w; ++x) {
                    *p++ = cell_center(x, w);
                    *p++ = cy;
                    *p++ = cz;
                }
            }
        }
        return g;
    }

    static SampleGrid identity_planar(int h, int w) {
        SampleGrid g;
        g.coords = Tensor({h, w, 2});
        float* p = g.coords.data();
        for (int y = 0; y < h; ++y) {
            const float cy = cell_center(y, h);
            for (int x = 0; x < w; ++x) {
                *p++ = cell_center(x, w);
                *p++ = cy;
            }
        }
        return g;
    }
};

namespace detail {

// Continuous cell index of a normalized coordinate; inverse of cell_center.
// Indices within 1e-4 of a lattice point snap onto it, which keeps identity
// and other exactly-representable grids bit-exact through interpolation.
inline double grid_to_index(float g, int n) {
    double u = 0.5 * ((static_cast<double>(g) + 1.0) * n - 1.0);
    const double r = std::nearbyint(u);
    if (std::abs(u - r) <= 1e-4) u = r;
    return u;
}

struct AxisSample {
    int lo, hi;
    double t;
};

inline AxisSample axis_sample(float g, int n) {
    const double u = grid_to_index(g, n);
    const double fl = std::floor(u);
    int lo = static_cast<int>(fl);
    const double t = u - fl;
    int hi = lo + 1;
    lo = std::clamp(lo, 0, n - 1);
    hi = std::clamp(hi, 0, n - 1);
    return {lo, hi, t};
}

}  // namespace detail

// Trilinear (bilinear when D = 1) sampling of `input` at the grid's
// normalized coordinates; out-of-range coordinates clamp to the border.
// input [C,D,H,W] with volumetric [D,H,W,3] grids, or [C,H,W] with planar
// [H,W,2] grids. Output spatial shape equals the grid's.
inline Tensor grid_sample(const Tensor& input, const Tensor& grid) {
    const bool planar = grid.rank() == 3;
    if (!planar && grid.rank() != 4) {
        throw ShapeError(detail::msg("grid_sample: grid rank ", grid.rank(), ", want 3 or 4"));
    }
    if (planar) {
        if (grid.dim(2) != 2) {
            throw ShapeError(detail::msg("grid_sample: planar grid last axis ", grid.dim(2), ", want 2"));
        }
        if (input.rank() != 3) {
            throw ShapeError(detail::msg("grid_sample: input rank ", input.rank(),
                                         " incompatible with planar grid"));
        }
        const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
        const int Hg = grid.dim(0), Wg = grid.dim(1);
        if (Hg != H) throw ShapeError(detail::msg("grid_sample: grid height ", Hg, " vs input height ", H));
        if (Wg != W) throw ShapeError(detail::msg("grid_sample: grid width ", Wg, " vs input width ", W));
        Tensor out({C, Hg, Wg});
        const float* g = grid.data();
        for (int y = 0; y < Hg; ++y) {
            for (int x = 0; x < Wg; ++x) {
                const float* gc = g + (static_cast<std::int64_t>(y) * Wg + x) * 2;
                const auto sx = detail::axis_sample(gc[0], W);
                const auto sy = detail::axis_sample(gc[1], H);
                for (int c = 0; c < C; ++c) {
                    const float* p = input.data() + static_cast<std::int64_t>(c) * H * W;
                    const double v00 = p[sy.lo * W + sx.lo], v01 = p[sy.lo * W + sx.hi];
                    const double v10 = p[sy.hi * W + sx.lo], v11 = p[sy.hi * W + sx.hi];
                    const double v0 = v00 + (v01 - v00) * sx.t;
                    const double v1 = v10 + (v11 - v10) * sx.t;
                    out.at({c, y, x}) = static_cast<float>(v0 + (v1 - v0) * sy.t);
                }
            }
        }
        return out;
    }

    if (grid.dim(3) != 3) {
        throw ShapeError(detail::msg("grid_sample: volumetric grid last axis ", grid.dim(3), ", want 3"));
    }
    if (input.rank() != 4) {
        throw ShapeError(detail::msg("grid_sample: input rank ", input.rank(),
                                     " incompatible with volumetric grid"));
    }
    const int C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Dg = grid.dim(0), Hg = grid.dim(1), Wg = grid.dim(2);
    if (Dg != D) throw ShapeError(detail::msg("grid_sample: grid depth ", Dg, " vs input depth ", D));
    if (Hg != H) throw ShapeError(detail::msg("grid_sample: grid height ", Hg, " vs input height ", H));
    if (Wg != W) throw ShapeError(detail::msg("grid_sample: grid width ", Wg, " vs input width ", W));
    Tensor out({C, Dg, Hg, Wg});
    const float* g = grid.data();
    const std::int64_t plane = static_cast<std::int64_t>(D) * H * W;
    for (int z = 0; z < Dg; ++z) {
        for (int y = 0; y < Hg; ++y) {
            for (int x = 0; x < Wg; ++x) {
                const float* gc = g + ((static_cast<std::int64_t>(z) * Hg + y) * Wg + x) * 3;
                const auto sx = detail::axis_sample(gc[0], W);
                const auto sy = detail::axis_sample(gc[1], H);
                const auto sz = detail::axis_sample(gc[2], D);
                for (int c = 0; c < C; ++c) {
                    const float* p = input.data() + c * plane;
                    auto v = [&](int dz, int dy, int dx) -> double {
                        return p[(static_cast<std::int64_t>(dz) * H + dy) * W + dx];
                    };
                    const double v00 = v(sz.lo, sy.lo, sx.lo) +
                                       (v(sz.lo, sy.lo, sx.hi) - v(sz.lo, sy.lo, sx.lo)) * sx.t;
                    const double v01 = v(sz.lo, sy.hi, sx.lo) +
                                       (v(sz.lo, sy.hi, sx.hi) - v(sz.lo, sy.hi, sx.lo)) * sx.t;
                    const double v10 = v(sz.hi, sy.lo, sx.lo) +
                                       (v(sz.hi, sy.lo, sx.hi) - v(sz.hi, sy.lo, sx.lo)) * sx.t;
                    const double v11 = v(sz.hi, sy.hi, sx.lo) +
                                       (v(sz.hi, sy.hi, sx.hi) - v(sz.hi, sy.hi, sx.lo)) * sx.t;
                    const double v0 = v00 + (v01 - v00) * sy.t;
                    const double v1 = v10 + (v11 - v10) * sy.t;
                    out.at({c, z, y, x}) = static_cast<float>(v0 + (v1 - v0) * sz.t);
                }
            }
        }
    }
    return out;
}

inline Tensor grid_sample(const Tensor& input, const SampleGrid& grid) {
    return grid_sample(input, grid.coords);
}

}  // namespace s2d
