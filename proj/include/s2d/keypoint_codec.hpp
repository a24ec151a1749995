#pragma once

// Lossless (at quantized precision) coding of per-frame keypoint sets:
// uniform quantization, temporal residuals against the previously coded
// frame, zigzag + order-0 Exp-Golomb binarization, and context-adaptive
// binary arithmetic coding. Prefix bins adapt per coordinate axis and bin
// position (positions >= 16 share one context); suffix bins are bypass.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "s2d/arith.hpp"
#include "s2d/error.hpp"
#include "s2d/keypoint_extractor.hpp"

namespace s2d {

struct QuantizedKeypointSet {
    std::vector<std::array<std::int32_t, 3>> points;

    int count() const { return static_cast<int>(points.size()); }
    bool operator==(const QuantizedKeypointSet&) const = default;
};

struct ResidualSet {
    std::vector<std::array<std::int32_t, 3>> deltas;

    int count() const { return static_cast<int>(deltas.size()); }
    bool operator==(const ResidualSet&) const = default;
};

struct KeypointBitstream {
    std::vector<std::uint8_t> bytes;
    std::int64_t bit_count = 0;  // exact coded length, before byte padding
};

// Residuals beyond this magnitude cannot come from keypoints in [-1, 1] at
// any supported quantization step; treat them as corrupt input.
inline constexpr std::int32_t kMaxResidualMagnitude = 1 << 20;

inline void check_q_log2(int q_log2) {
    if (q_log2 < 2 || q_log2 > 12) {
        throw ShapeError(detail::msg("q_log2 ", q_log2, " outside supported range [2, 12]"));
    }
}

// index = round-half-away-from-zero(coord / q) with q = 2^-q_log2.
inline QuantizedKeypointSet quantize(const KeypointSet& kps, int q_log2) {
    check_q_log2(q_log2);
    const double scale = static_cast<double>(1 << q_log2);
    QuantizedKeypointSet out;
    out.points.resize(kps.points.size());
    for (std::size_t i = 0; i < kps.points.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            const double v = static_cast<double>(kps.points[i][static_cast<std::size_t>(a)]) * scale;
            out.points[i][static_cast<std::size_t>(a)] =
                static_cast<std::int32_t>(v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
        }
    }
    return out;
}

inline KeypointSet dequantize(const QuantizedKeypointSet& q, int q_log2) {
    check_q_log2(q_log2);
    const float step = 1.0f / static_cast<float>(1 << q_log2);
    KeypointSet out;
    out.points.resize(q.points.size());
    for (std::size_t i = 0; i < q.points.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            out.points[i][static_cast<std::size_t>(a)] =
                static_cast<float>(q.points[i][static_cast<std::size_t>(a)]) * step;
        }
    }
    return out;
}

inline ResidualSet predict_residual(const QuantizedKeypointSet& current,
                                    const QuantizedKeypointSet& previous_coded) {
    if (current.count() != previous_coded.count()) {
        throw ShapeError(detail::msg("predict_residual: keypoint count ", current.count(), " vs ",
                                     previous_coded.count()));
    }
    ResidualSet out;
    out.deltas.resize(current.points.size());
    for (std::size_t i = 0; i < current.points.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            out.deltas[i][static_cast<std::size_t>(a)] =
                current.points[i][static_cast<std::size_t>(a)] -
                previous_coded.points[i][static_cast<std::size_t>(a)];
        }
    }
    return out;
}

inline QuantizedKeypointSet apply_residual(const ResidualSet& residuals,
                                           const QuantizedKeypointSet& previous_coded) {
    if (residuals.count() != previous_coded.count()) {
        throw ShapeError(detail::msg("apply_residual: keypoint count ", residuals.count(), " vs ",
                                     previous_coded.count()));
    }
    QuantizedKeypointSet out;
    out.points.resize(residuals.deltas.size());
    for (std::size_t i = 0; i < residuals.deltas.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            out.points[i][static_cast<std::size_t>(a)] =
                previous_coded.points[i][static_cast<std::size_t>(a)] +
                residuals.deltas[i][static_cast<std::size_t>(a)];
        }
    }
    return out;
}

// Adaptive contexts for one keypoint stream. Encoder and decoder advance
// their copies identically, so after any shared symbol prefix the two
// states compare equal.
struct CoderState {
    static constexpr int kPrefixContexts = 17;  // positions 0..15, >=16 shared

    std::array<BinProb, 3 * kPrefixContexts> prefix{};

    BinProb& prefix_ctx(int axis, int pos) {
        const int p = pos < kPrefixContexts - 1 ? pos : kPrefixContexts - 1;
        return prefix[static_cast<std::size_t>(axis * kPrefixContexts + p)];
    }

    void reset() { prefix.fill(BinProb{}); }

    bool operator==(const CoderState&) const = default;
};

namespace detail {

inline std::uint32_t zigzag(std::int32_t v) {
    if (v == 0) return 0;
    return v > 0 ? 2u * static_cast<std::uint32_t>(v)
                 : 2u * static_cast<std::uint32_t>(-v) - 1u;
}

inline std::int32_t unzigzag(std::uint32_t u) {
    if ((u & 1u) != 0) return -static_cast<std::int32_t>((u + 1u) / 2u);
    return static_cast<std::int32_t>(u / 2u);
}

}  // namespace detail

inline KeypointBitstream encode_frame(const ResidualSet& residuals, CoderState& state) {
    BitWriter writer;
    ArithEncoder enc(writer);
    for (const auto& delta : residuals.deltas) {
        for (int axis = 0; axis < 3; ++axis) {
            const std::int32_t v = delta[static_cast<std::size_t>(axis)];
            if (v > kMaxResidualMagnitude || v < -kMaxResidualMagnitude) {
                throw ParseError(detail::msg("residual magnitude ", v, " exceeds ",
                                             kMaxResidualMagnitude));
            }
            const std::uint32_t m = detail::zigzag(v) + 1u;
            const int len = std::bit_width(m);
            for (int pos = 0; pos + 1 < len; ++pos) enc.encode(1, state.prefix_ctx(axis, pos));
            enc.encode(0, state.prefix_ctx(axis, len - 1));
            for (int i = len - 2; i >= 0; --i) enc.encode_bypass(static_cast<int>((m >> i) & 1u));
        }
    }
    enc.finish();
    KeypointBitstream out;
    out.bit_count = writer.bit_count();
    out.bytes = writer.take();
    return out;
}

// On any throw the state is poisoned: it may have advanced past some of the
// payload's symbols, so the stream cannot be resumed.
inline ResidualSet decode_frame(const KeypointBitstream& bits, CoderState& state, int keypoints) {
    if ((bits.bit_count + 7) / 8 > static_cast<std::int64_t>(bits.bytes.size())) {
        throw ParseError(detail::msg("keypoint payload truncated: ", bits.bytes.size(),
                                     " bytes cannot hold ", bits.bit_count, " bits"));
    }
    BitReader reader(bits.bytes.data(), bits.bytes.size());
    ArithDecoder dec(reader);
    ResidualSet out;
    out.deltas.resize(static_cast<std::size_t>(keypoints));
    for (auto& delta : out.deltas) {
        for (int axis = 0; axis < 3; ++axis) {
            int pos = 0;
            while (dec.decode(state.prefix_ctx(axis, pos)) == 1) {
                if (++pos > 21) throw ParseError("keypoint payload: residual prefix too long");
            }
            std::uint32_t m = 1;
            for (int i = 0; i < pos; ++i) m = (m << 1) | static_cast<std::uint32_t>(dec.decode_bypass());
            const std::int32_t v = detail::unzigzag(m - 1u);
            if (v > kMaxResidualMagnitude || v < -kMaxResidualMagnitude) {
                throw ParseError(detail::msg("keypoint payload: residual magnitude ", v, " exceeds ",
                                             kMaxResidualMagnitude));
            }
            delta[static_cast<std::size_t>(axis)] = v;
        }
    }
    return out;
}

struct BitReport {
    std::vector<std::int64_t> per_frame_bits;  // entry 0 is the key frame: 0 bits
    std::int64_t total_bits = 0;
};

// Exact coded size of the keypoint stream alone: frame 0 seeds the
// predictor and costs nothing, every later frame is residual-coded with
// contexts persisting across the sequence.
inline BitReport measure_bits(const std::vector<KeypointSet>& frames, int q_log2) {
    if (frames.empty()) throw ParseError("measure_bits: empty frame sequence");
    BitReport report;
    report.per_frame_bits.reserve(frames.size());
    CoderState state;
    QuantizedKeypointSet previous = quantize(frames.front(), q_log2);
    report.per_frame_bits.push_back(0);
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const QuantizedKeypointSet current = quantize(frames[i], q_log2);
        const KeypointBitstream bits = encode_frame(predict_residual(current, previous), state);
        report.per_frame_bits.push_back(bits.bit_count);
        report.total_bits += bits.bit_count;
        previous = current;
    }
    return report;
}

}  // namespace s2d
