#pragma once

// The "S2DW" weight container shared by every forward-pass module.
//
//   magic "S2DW" | version u8 | records...
//   record: name length u16 LE | UTF-8 name | rank u8 | dims u32 LE each |
//           row-major little-endian f32 payload
//
// Records are written in lexicographic name order so saving is
// byte-deterministic. Loading validates that every record fits and that the
// file is consumed exactly.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "s2d/error.hpp"
#include "s2d/tensor.hpp"

namespace s2d {

using WeightMap = std::map<std::string, Tensor>;

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

// Bounds-checked little-endian reader over a byte buffer.
class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size, std::string what)
        : data_(data), size_(size), what_(std::move(what)) {}

    std::size_t remaining() const { return size_ - pos_; }
    std::size_t pos() const { return pos_; }

    const std::uint8_t* take(std::size_t n) {
        if (remaining() < n) {
            throw ParseError(msg(what_, ": truncated, need ", n, " bytes at offset ", pos_,
                                 ", have ", remaining()));
        }
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        const std::uint8_t* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }

    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }

    float f32() { return std::bit_cast<float>(u32()); }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string what_;
};

}  // namespace detail

inline constexpr std::uint8_t kWeightFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_weights(const WeightMap& weights) {
    std::vector<std::uint8_t> out = {'S', '2', 'D', 'W', kWeightFormatVersion};
    for (const auto& [name, tensor] : weights) {
        if (name.size() > 0xffff) throw ShapeError(detail::msg("weight name too long: ", name.size()));
        if (tensor.rank() > 0xff) throw ShapeError(detail::msg("weight rank too large: ", tensor.rank()));
        detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<std::uint8_t>(tensor.rank()));
        for (int a = 0; a < tensor.rank(); ++a) {
            detail::put_u32(out, static_cast<std::uint32_t>(tensor.dim(a)));
        }
        for (std::int64_t i = 0; i < tensor.size(); ++i) detail::put_f32(out, tensor[i]);
    }
    return out;
}

inline WeightMap parse_weights(const std::uint8_t* data, std::size_t size) {
    detail::ByteReader r(data, size, "weight file");
    const std::uint8_t* m = r.take(4);
    if (std::memcmp(m, "S2DW", 4) != 0) throw ParseError("weight file: bad magic, expected S2DW");
    if (r.u8() != kWeightFormatVersion) throw ParseError("weight file: unsupported version");
    WeightMap out;
    while (r.remaining() > 0) {
        const std::uint16_t name_len = r.u16();
        const std::uint8_t* np = r.take(name_len);
        std::string name(reinterpret_cast<const char*>(np), name_len);
        const int rank = r.u8();
        std::vector<int> shape(static_cast<std::size_t>(rank));
        std::int64_t count = 1;
        for (int a = 0; a < rank; ++a) {
            const std::uint32_t d = r.u32();
            if (d == 0 || d > 0x7fffffffu) {
                throw ParseError(detail::msg("weight file: bad dimension ", d, " in tensor ", name));
            }
            shape[static_cast<std::size_t>(a)] = static_cast<int>(d);
            count *= d;
            if (count > (1ll << 31)) {
                throw ParseError(detail::msg("weight file: tensor ", name, " too large"));
            }
        }
        std::vector<float> values(static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i) values[static_cast<std::size_t>(i)] = r.f32();
        if (out.count(name) != 0) {
            throw ParseError(detail::msg("weight file: duplicate tensor ", name));
        }
        out.emplace(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
    }
    return out;
}

inline void save_weights(const std::string& path, const WeightMap& weights) {
    const std::vector<std::uint8_t> bytes = serialize_weights(weights);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(detail::msg("cannot open ", path, " for writing"));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ParseError(detail::msg("write failed: ", path));
}

inline WeightMap load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw ParseError(detail::msg("cannot open weight file ", path));
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw ParseError(detail::msg("read failed: ", path));
    return parse_weights(bytes.data(), bytes.size());
}

// Look up a tensor that the configured topology requires, checking its shape.
inline const Tensor& fetch_weight(const WeightMap& weights, const std::string& name,
                                  const std::vector<int>& shape) {
    auto it = weights.find(name);
    if (it == weights.end()) {
        throw ShapeError(detail::msg("missing weight tensor ", name));
    }
    if (it->second.shape() != shape) {
        std::string want = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) want += ",";
            want += std::to_string(shape[i]);
        }
        want += "]";
        throw ShapeError(detail::msg("weight tensor ", name, " has shape ", shape_str(it->second),
                                     ", want ", want));
    }
    return it->second;
}

}  // namespace s2d
