#pragma once

// Adaptive binary arithmetic coding: a 32-bit renormalizing integer coder
// (low/high interval with pending-bit carry resolution, MSB-first output)
// over count-pair probability estimators. Integer arithmetic only, so
// identical inputs produce byte-identical payloads on any platform.

#include <cstdint>
#include <utility>

#include "s2d/bitio.hpp"

namespace s2d {

// Count-pair probability estimator. Counts rescale once their total reaches
// kRescaleLimit; the coding probability is the count ratio clamped to
// [1/64, 63/64].
class BinProb {
public:
    static constexpr std::uint32_t kRescaleLimit = 1024;

    // (numerator of P(bit = 0), denominator)
    std::pair<std::uint32_t, std::uint32_t> prob0() const {
        const std::uint32_t total = c0_ + c1_;
        if (64 * c0_ < total) return {1, 64};
        if (64 * c1_ < total) return {63, 64};
        return {c0_, total};
    }

    double p0() const {
        const auto [num, den] = prob0();
        return static_cast<double>(num) / den;
    }

    void update(int bit) {
        if (bit) ++c1_; else ++c0_;
        if (c0_ + c1_ >= kRescaleLimit) {
            c0_ = static_cast<std::uint16_t>((c0_ + 1) >> 1);
            c1_ = static_cast<std::uint16_t>((c1_ + 1) >> 1);
        }
    }

    bool operator==(const BinProb&) const = default;

private:
    std::uint16_t c0_ = 1;
    std::uint16_t c1_ = 1;
};

namespace detail {

inline constexpr std::uint64_t kArithTop = 1ull << 32;
inline constexpr std::uint64_t kArithHalf = kArithTop >> 1;
inline constexpr std::uint64_t kArithQuarter = kArithTop >> 2;
inline constexpr std::uint64_t kArithThreeQuarters = 3 * kArithQuarter;

}  // namespace detail

class ArithEncoder {
public:
    explicit ArithEncoder(BitWriter& out) : out_(out) {}

    void encode(int bit, BinProb& model) {
        const auto [num, den] = model.prob0();
        encode_raw(bit, num, den);
        model.update(bit);
    }

    void encode_bypass(int bit) { encode_raw(bit, 1, 2); }

    // Terminates the stream. The decoder reconstructs the final interval
    // from these bits plus zero-extension, so nothing else needs flushing.
    void finish() {
        ++pending_;
        if (lo_ < detail::kArithQuarter) emit(0); else emit(1);
    }

private:
    void encode_raw(int bit, std::uint32_t num0, std::uint32_t den) {
        const std::uint64_t range = hi_ - lo_ + 1;
        const std::uint64_t split = lo_ + (range * num0) / den - 1;
        if (bit == 0) hi_ = split; else lo_ = split + 1;
        for (;;) {
            if (hi_ < detail::kArithHalf) {
                emit(0);
            } else if (lo_ >= detail::kArithHalf) {
                emit(1);
                lo_ -= detail::kArithHalf;
                hi_ -= detail::kArithHalf;
            } else if (lo_ >= detail::kArithQuarter && hi_ < detail::kArithThreeQuarters) {
                ++pending_;
                lo_ -= detail::kArithQuarter;
                hi_ -= detail::kArithQuarter;
            } else {
                break;
            }
            lo_ <<= 1;
            hi_ = (hi_ << 1) | 1;
        }
    }

    void emit(int bit) {
        out_.put(bit);
        for (; pending_ > 0; --pending_) out_.put(bit ^ 1);
    }

    std::uint64_t lo_ = 0;
    std::uint64_t hi_ = detail::kArithTop - 1;
    std::uint64_t pending_ = 0;
    BitWriter& out_;
};

class ArithDecoder {
public:
    explicit ArithDecoder(BitReader& in) : in_(in) {
        for (int i = 0; i < 32; ++i) code_ = (code_ << 1) | static_cast<std::uint64_t>(in_.get());
    }

    int decode(BinProb& model) {
        const auto [num, den] = model.prob0();
        const int bit = decode_raw(num, den);
        model.update(bit);
        return bit;
    }

    int decode_bypass() { return decode_raw(1, 2); }

private:
    int decode_raw(std::uint32_t num0, std::uint32_t den) {
        const std::uint64_t range = hi_ - lo_ + 1;
        const std::uint64_t split = lo_ + (range * num0) / den - 1;
        const int bit = code_ > split ? 1 : 0;
        if (bit == 0) hi_ = split; else lo_ = split + 1;
        for (;;) {
            if (hi_ < detail::kArithHalf) {
                // nothing to subtract
            } else if (lo_ >= detail::kArithHalf) {
                lo_ -= detail::kArithHalf;
                hi_ -= detail::kArithHalf;
                code_ -= detail::kArithHalf;
            } else if (lo_ >= detail::kArithQuarter && hi_ < detail::kArithThreeQuarters) {
                lo_ -= detail::kArithQuarter;
                hi_ -= detail::kArithQuarter;
                code_ -= detail::kArithQuarter;
            } else {
                break;
            }
            lo_ <<= 1;
            hi_ = (hi_ << 1) | 1;
            code_ = (code_ << 1) | static_cast<std::uint64_t>(in_.get());
        }
        return bit;
    }

    std::uint64_t lo_ = 0;
    std::uint64_t hi_ = detail::kArithTop - 1;
    std::uint64_t code_ = 0;
    BitReader& in_;
};

}  // namespace s2d
