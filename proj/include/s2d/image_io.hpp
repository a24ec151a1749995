#pragma once

// 8-bit RGB raster I/O. Frames move through the library as [3,H,W] float
// tensors in [0,1]; on disk they are binary PPM (P6) or PNG. The PNG path
// is deliberately narrow: 8-bit gray/RGB/RGBA, no interlacing, zlib for the
// stream itself. Writing always produces filter-0 RGB rows at a fixed
// compression level, so identical frames serialize to identical bytes.

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "s2d/error.hpp"
#include "s2d/tensor.hpp"
#include "s2d/weights.hpp"

namespace s2d {

namespace detail {

inline std::vector<std::uint8_t> tensor_to_rgb8(const Tensor& frame) {
    if (frame.rank() != 3 || frame.dim(0) != 3) {
        throw ShapeError(detail::msg("image encode: frame shape ", shape_str(frame), ", want [3,H,W]"));
    }
    const int H = frame.dim(1), W = frame.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(3 * plane));
    for (std::int64_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            const float v = frame[c * plane + i];
            const long q = std::lround(static_cast<double>(v) * 255.0);
            out[static_cast<std::size_t>(3 * i + c)] =
                static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
        }
    }
    return out;
}

inline Tensor rgb8_to_tensor(const std::uint8_t* rgb, int h, int w) {
    Tensor out({3, h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (std::int64_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            out[c * plane + i] = static_cast<float>(rgb[3 * i + c]) / 255.0f;
        }
    }
    return out;
}

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::uint8_t* data, std::size_t len) {
    put_u32_be(out, static_cast<std::uint32_t>(len));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    if (len > 0) out.insert(out.end(), data, data + len);
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), out.data() + type_at,
                            static_cast<uInt>(4 + len));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

inline constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Tensor& frame) {
    const int H = frame.dim(1), W = frame.dim(2);
    const std::vector<std::uint8_t> rgb = detail::tensor_to_rgb8(frame);

    std::vector<std::uint8_t> raw(static_cast<std::size_t>(H) * (1 + 3 * static_cast<std::size_t>(W)));
    for (int y = 0; y < H; ++y) {
        std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (1 + 3 * static_cast<std::size_t>(W));
        row[0] = 0;  // filter: none
        std::memcpy(row + 1, rgb.data() + static_cast<std::size_t>(y) * 3 * W, 3 * static_cast<std::size_t>(W));
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> deflated(bound);
    if (compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw ParseError("png encode: deflate failed");
    }
    deflated.resize(bound);

    std::vector<std::uint8_t> out(detail::kPngSignature, detail::kPngSignature + 8);
    std::uint8_t ihdr[13];
    ihdr[0] = static_cast<std::uint8_t>(W >> 24);
    ihdr[1] = static_cast<std::uint8_t>((W >> 16) & 0xff);
    ihdr[2] = static_cast<std::uint8_t>((W >> 8) & 0xff);
    ihdr[3] = static_cast<std::uint8_t>(W & 0xff);
    ihdr[4] = static_cast<std::uint8_t>(H >> 24);
    ihdr[5] = static_cast<std::uint8_t>((H >> 16) & 0xff);
    ihdr[6] = static_cast<std::uint8_t>((H >> 8) & 0xff);
    ihdr[7] = static_cast<std::uint8_t>(H & 0xff);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // color type: truecolor
    ihdr[10] = 0;  // compression
    ihdr[11] = 0;  // filter method
    ihdr[12] = 0;  // interlace
    detail::png_chunk(out, "IHDR", ihdr, 13);
    detail::png_chunk(out, "IDAT", deflated.data(), deflated.size());
    detail::png_chunk(out, "IEND", nullptr, 0);
    return out;
}

inline Tensor decode_png(const std::uint8_t* data, std::size_t size) {
    if (size < 8 || std::memcmp(data, detail::kPngSignature, 8) != 0) {
        throw ParseError("png decode: bad signature");
    }
    std::size_t pos = 8;
    int width = 0, height = 0, color_type = -1;
    bool saw_ihdr = false, saw_iend = false;
    std::vector<std::uint8_t> idat;
    while (pos < size) {
        if (size - pos < 12) throw ParseError("png decode: truncated chunk header");
        const std::uint32_t len = detail::get_u32_be(data + pos);
        if (len > 0x7fffffffu || size - pos - 12 < len) throw ParseError("png decode: truncated chunk");
        const std::uint8_t* type = data + pos + 4;
        const std::uint8_t* payload = data + pos + 8;
        const std::uint32_t want_crc = detail::get_u32_be(payload + len);
        const uLong got_crc = crc32(crc32(0L, Z_NULL, 0), type, static_cast<uInt>(4 + len));
        if (static_cast<std::uint32_t>(got_crc) != want_crc) {
            throw ParseError("png decode: chunk crc mismatch");
        }
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (saw_ihdr || len != 13) throw ParseError("png decode: bad IHDR");
            saw_ihdr = true;
            width = static_cast<int>(detail::get_u32_be(payload));
            height = static_cast<int>(detail::get_u32_be(payload + 4));
            if (width <= 0 || height <= 0 || width > 1 << 15 || height > 1 << 15) {
                throw ParseError(detail::msg("png decode: unsupported size ", width, "x", height));
            }
            if (payload[8] != 8) throw ParseError("png decode: only 8-bit depth supported");
            color_type = payload[9];
            if (color_type != 0 && color_type != 2 && color_type != 6) {
                throw ParseError(detail::msg("png decode: unsupported color type ", color_type));
            }
            if (payload[10] != 0 || payload[11] != 0) throw ParseError("png decode: bad methods");
            if (payload[12] != 0) throw ParseError("png decode: interlacing not supported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!saw_ihdr) throw ParseError("png decode: IDAT before IHDR");
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        // ancillary chunks are skipped
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend) throw ParseError("png decode: missing IHDR or IEND");
    if (idat.empty()) throw ParseError("png decode: no image data");

    const int channels = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
    const std::size_t stride = 1 + static_cast<std::size_t>(width) * channels;
    const std::size_t expected = stride * static_cast<std::size_t>(height);
    std::vector<std::uint8_t> raw(expected);
    uLongf out_len = static_cast<uLongf>(expected);
    const int zret = uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zret != Z_OK || out_len != expected) throw ParseError("png decode: inflate failed");

    // Undo per-row filtering in place.
    const int bpp = channels;
    for (int y = 0; y < height; ++y) {
        std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * stride;
        const std::uint8_t* prev = y > 0 ? raw.data() + static_cast<std::size_t>(y - 1) * stride : nullptr;
        const int filter = row[0];
        std::uint8_t* px = row + 1;
        const std::uint8_t* up = prev ? prev + 1 : nullptr;
        const int n = width * channels;
        switch (filter) {
            case 0:
                break;
            case 1:
                for (int i = bpp; i < n; ++i) px[i] = static_cast<std::uint8_t>(px[i] + px[i - bpp]);
                break;
            case 2:
                if (up) for (int i = 0; i < n; ++i) px[i] = static_cast<std::uint8_t>(px[i] + up[i]);
                break;
            case 3:
                for (int i = 0; i < n; ++i) {
                    const int a = i >= bpp ? px[i - bpp] : 0;
                    const int b = up ? up[i] : 0;
                    px[i] = static_cast<std::uint8_t>(px[i] + ((a + b) >> 1));
                }
                break;
            case 4:
                for (int i = 0; i < n; ++i) {
                    const int a = i >= bpp ? px[i - bpp] : 0;
                    const int b = up ? up[i] : 0;
                    const int c = (up && i >= bpp) ? up[i - bpp] : 0;
                    const int p = a + b - c;
                    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    const int pred = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    px[i] = static_cast<std::uint8_t>(px[i] + pred);
                }
                break;
            default:
                throw ParseError(detail::msg("png decode: bad filter type ", filter));
        }
    }

    Tensor out({3, height, width});
    const std::int64_t plane = static_cast<std::int64_t>(height) * width;
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* px = raw.data() + static_cast<std::size_t>(y) * stride + 1;
        for (int x = 0; x < width; ++x) {
            const std::int64_t i = static_cast<std::int64_t>(y) * width + x;
            if (channels == 1) {
                const float v = static_cast<float>(px[x]) / 255.0f;
                out[i] = out[plane + i] = out[2 * plane + i] = v;
            } else {
                out[i] = static_cast<float>(px[x * channels]) / 255.0f;
                out[plane + i] = static_cast<float>(px[x * channels + 1]) / 255.0f;
                out[2 * plane + i] = static_cast<float>(px[x * channels + 2]) / 255.0f;
            }
        }
    }
    return out;
}

inline std::vector<std::uint8_t> encode_ppm(const Tensor& frame) {
    const std::vector<std::uint8_t> rgb = detail::tensor_to_rgb8(frame);
    const std::string header =
        "P6\n" + std::to_string(frame.dim(2)) + " " + std::to_string(frame.dim(1)) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), rgb.begin(), rgb.end());
    return out;
}

inline Tensor decode_ppm(const std::uint8_t* data, std::size_t size) {
    std::size_t pos = 2;
    if (size < 2 || data[0] != 'P' || data[1] != '6') throw ParseError("ppm decode: not a P6 file");
    auto next_int = [&]() -> int {
        // skip whitespace and '#' comments
        for (;;) {
            while (pos < size && (data[pos] == ' ' || data[pos] == '\t' || data[pos] == '\r' ||
                                  data[pos] == '\n')) {
                ++pos;
            }
            if (pos < size && data[pos] == '#') {
                while (pos < size && data[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        if (pos >= size || data[pos] < '0' || data[pos] > '9') {
            throw ParseError("ppm decode: malformed header");
        }
        long v = 0;
        while (pos < size && data[pos] >= '0' && data[pos] <= '9') {
            v = v * 10 + (data[pos] - '0');
            if (v > 1 << 20) throw ParseError("ppm decode: header value too large");
            ++pos;
        }
        return static_cast<int>(v);
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (w <= 0 || h <= 0) throw ParseError("ppm decode: bad dimensions");
    if (maxval != 255) throw ParseError(detail::msg("ppm decode: maxval ", maxval, ", want 255"));
    if (pos >= size) throw ParseError("ppm decode: missing raster");
    ++pos;  // single whitespace after maxval
    const std::size_t need = 3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (size - pos < need) throw ParseError("ppm decode: truncated raster");
    return detail::rgb8_to_tensor(data + pos, h, w);
}

// Sniff the payload type from its leading bytes.
inline Tensor decode_image(const std::uint8_t* data, std::size_t size) {
    if (size >= 8 && std::memcmp(data, detail::kPngSignature, 8) == 0) return decode_png(data, size);
    if (size >= 2 && data[0] == 'P' && data[1] == '6') return decode_ppm(data, size);
    throw ParseError("image decode: unrecognized format (want PNG or binary PPM)");
}

inline Tensor decode_image(const std::vector<std::uint8_t>& bytes) {
    return decode_image(bytes.data(), bytes.size());
}

inline std::vector<std::uint8_t> read_binary_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw ParseError(detail::msg("cannot open ", path));
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw ParseError(detail::msg("read failed: ", path));
    return bytes;
}

inline void write_binary_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(detail::msg("cannot open ", path, " for writing"));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ParseError(detail::msg("write failed: ", path));
}

inline Tensor load_image(const std::string& path) { return decode_image(read_binary_file(path)); }

// Chooses the format from the extension: .png or .ppm.
inline void save_image(const std::string& path, const Tensor& frame) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0) {
        write_binary_file(path, encode_ppm(frame));
    } else {
        write_binary_file(path, encode_png(frame));
    }
}

}  // namespace s2d
