#pragma once

// The "S2DC" container. All multi-byte integers are little-endian.
//
//   magic "S2DC" | version u8 | width u16 | height u16 | K u8 | q_log2 u8 |
//   depth u8 | fps_num u16 | fps_den u16 | keyframe_codec_tag u8 |
//   keyframe_payload_len u32 | keyframe payload bytes |
//   inter-frame records: { payload_len u32 | payload bytes } until EOF
//
// Tag 0 carries a lossless PNG key frame; tag 1 carries an externally
// produced opaque payload whose decoded image arrives out of band.

#include <cstdint>
#include <cstring>
#include <vector>

#include "s2d/error.hpp"
#include "s2d/weights.hpp"

namespace s2d {

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::uint8_t kKeyframePng = 0;
inline constexpr std::uint8_t kKeyframeExternal = 1;
inline constexpr std::size_t kContainerFixedHeaderBytes = 21;

struct ContainerHeader {
    std::uint8_t version = kContainerVersion;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint8_t keypoints = 15;
    std::uint8_t q_log2 = 6;
    std::uint8_t depth = 4;
    std::uint16_t fps_num = 25;
    std::uint16_t fps_den = 1;
    std::uint8_t keyframe_codec_tag = kKeyframePng;
    std::vector<std::uint8_t> keyframe_payload;

    bool operator==(const ContainerHeader&) const = default;
};

struct Container {
    ContainerHeader header;
    std::vector<std::vector<std::uint8_t>> records;  // one keypoint payload per inter frame
};

inline void serialize_header(std::vector<std::uint8_t>& out, const ContainerHeader& h) {
    out.insert(out.end(), {'S', '2', 'D', 'C'});
    out.push_back(h.version);
    detail::put_u16(out, h.width);
    detail::put_u16(out, h.height);
    out.push_back(h.keypoints);
    out.push_back(h.q_log2);
    out.push_back(h.depth);
    detail::put_u16(out, h.fps_num);
    detail::put_u16(out, h.fps_den);
    out.push_back(h.keyframe_codec_tag);
    detail::put_u32(out, static_cast<std::uint32_t>(h.keyframe_payload.size()));
    out.insert(out.end(), h.keyframe_payload.begin(), h.keyframe_payload.end());
}

inline ContainerHeader parse_header(detail::ByteReader& r) {
    const std::uint8_t* m = r.take(4);
    if (std::memcmp(m, "S2DC", 4) != 0) throw ParseError("container: bad magic, expected S2DC");
    ContainerHeader h;
    h.version = r.u8();
    if (h.version != kContainerVersion) {
        throw ParseError(detail::msg("container: unsupported version ", int(h.version)));
    }
    h.width = r.u16();
    h.height = r.u16();
    h.keypoints = r.u8();
    h.q_log2 = r.u8();
    h.depth = r.u8();
    h.fps_num = r.u16();
    h.fps_den = r.u16();
    h.keyframe_codec_tag = r.u8();
    if (h.width == 0 || h.height == 0) throw ParseError("container: zero frame dimensions");
    if (h.keypoints == 0) throw ParseError("container: zero keypoints");
    if (h.q_log2 < 2 || h.q_log2 > 12) {
        throw ParseError(detail::msg("container: q_log2 ", int(h.q_log2), " outside [2, 12]"));
    }
    if (h.depth == 0) throw ParseError("container: zero motion depth");
    if (h.fps_num == 0 || h.fps_den == 0) throw ParseError("container: zero fps field");
    if (h.keyframe_codec_tag != kKeyframePng && h.keyframe_codec_tag != kKeyframeExternal) {
        throw ParseError(detail::msg("container: unknown keyframe codec tag ",
                                     int(h.keyframe_codec_tag)));
    }
    const std::uint32_t payload_len = r.u32();
    if (payload_len > r.remaining()) throw ParseError("container: truncated keyframe payload");
    const std::uint8_t* p = r.take(payload_len);
    h.keyframe_payload.assign(p, p + payload_len);
    return h;
}

inline std::vector<std::uint8_t> serialize_container(const Container& c) {
    std::vector<std::uint8_t> out;
    serialize_header(out, c.header);
    for (const auto& rec : c.records) {
        detail::put_u32(out, static_cast<std::uint32_t>(rec.size()));
        out.insert(out.end(), rec.begin(), rec.end());
    }
    return out;
}

// Parses header plus every inter-frame record; the byte stream must be
// consumed exactly (no trailing garbage).
inline Container parse_container(const std::uint8_t* data, std::size_t size) {
    detail::ByteReader r(data, size, "container");
    Container c;
    c.header = parse_header(r);
    while (r.remaining() > 0) {
        const std::uint32_t len = r.u32();
        if (len > r.remaining()) {
            throw ParseError(detail::msg("container: truncated frame record, need ", len,
                                         " bytes, have ", r.remaining()));
        }
        const std::uint8_t* p = r.take(len);
        c.records.emplace_back(p, p + len);
    }
    return c;
}

}  // namespace s2d
