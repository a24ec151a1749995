#pragma once

// MSB-first bit packing. The reader zero-extends past the end of its buffer
// (arithmetic-coder lookahead relies on this) and records that it did so.

#include <cstdint>
#include <utility>
#include <vector>

namespace s2d {

class BitWriter {
public:
    void put(int bit) {
        cur_ = static_cast<std::uint8_t>((cur_ << 1) | (bit & 1));
        if (++fill_ == 8) {
            bytes_.push_back(cur_);
            cur_ = 0;
            fill_ = 0;
        }
        ++count_;
    }

    std::int64_t bit_count() const { return count_; }

    // Zero-pads the final partial byte.
    std::vector<std::uint8_t> take() {
        if (fill_ > 0) {
            bytes_.push_back(static_cast<std::uint8_t>(cur_ << (8 - fill_)));
            cur_ = 0;
            fill_ = 0;
        }
        return std::move(bytes_);
    }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint8_t cur_ = 0;
    int fill_ = 0;
    std::int64_t count_ = 0;
};

class BitReader {
public:
    BitReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    int get() {
        const std::size_t byte = pos_ >> 3;
        ++pos_;
        if (byte >= size_) {
            overran_ = true;
            return 0;
        }
        return (data_[byte] >> (7 - ((pos_ - 1) & 7))) & 1;
    }

    bool overran() const { return overran_; }
    std::size_t bits_read() const { return pos_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    bool overran_ = false;
};

}  // namespace s2d
