#pragma once

// Forward-only synthesis heads over the refined feature: occlusion-gated
// feature refinement, the upsampling frame generator, and the vertex
// regressor (bottleneck residual blocks -> adaptive pooling -> one fully
// connected map to 20950 values, reshaped to 10475 (x, y) rows).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "s2d/tensor.hpp"
#include "s2d/unet.hpp"
#include "s2d/weights.hpp"

namespace s2d {

inline constexpr int kVertexCount = 10475;

// [10475, 2] normalized image coordinates in [0, 1]^2.
struct VertexSet {
    Tensor coords;
};

struct GeneratorConfig {
    int in_channels = 8;
    int base_channels = 32;
    int levels = 2;  // 2x upsampling steps
};

struct VertexHeadConfig {
    int in_channels = 8;
    int blocks = 3;
    int width = 8;  // bottleneck width inside each residual block
};

// Warp the texture volume with the dense flow, reduce depth by mean, then
// gate channel-wise with the occlusion confidences.
inline Tensor refine_feature(const Tensor& texture, const Tensor& flow, const Tensor& occlusion) {
    if (texture.rank() != 4) {
        throw ShapeError(detail::msg("refine_feature: texture rank ", texture.rank(), ", want 4"));
    }
    if (flow.rank() != 4 || flow.dim(3) != 3) {
        throw ShapeError(detail::msg("refine_feature: flow shape ", shape_str(flow),
                                     ", want [D,H,W,3]"));
    }
    if (occlusion.rank() != 3 || occlusion.dim(0) != 1) {
        throw ShapeError(detail::msg("refine_feature: occlusion shape ", shape_str(occlusion),
                                     ", want [1,H,W]"));
    }
    const Tensor warped = grid_sample(texture, flow);
    const int C = warped.dim(0), D = warped.dim(1), H = warped.dim(2), W = warped.dim(3);
    Tensor flat({C, H, W});
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const double inv = 1.0 / D;
    for (int c = 0; c < C; ++c) {
        const float* src = warped.data() + static_cast<std::int64_t>(c) * D * plane;
        float* dst = flat.data() + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            double acc = 0.0;
            for (int z = 0; z < D; ++z) acc += src[z * plane + i];
            dst[i] = static_cast<float>(acc * inv);
        }
    }
    return hadamard(flat, occlusion);
}

inline std::vector<std::pair<std::string, std::vector<int>>> generator_weight_shapes(
    const GeneratorConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    auto conv = [&out](const std::string& name, int out_ch, int in_ch) {
        out.emplace_back(name + ".w", std::vector<int>{out_ch, in_ch, 3, 3});
        out.emplace_back(name + ".b", std::vector<int>{out_ch});
    };
    conv("gen.in", cfg.base_channels, cfg.in_channels);
    int ch = cfg.base_channels;
    for (int l = 1; l <= cfg.levels; ++l) {
        conv("gen.up" + std::to_string(l), ch / 2, ch);
        ch /= 2;
    }
    conv("gen.out", 3, ch);
    return out;
}

// Conv/upsample stack ending in a sigmoid, so every output pixel lies in
// [0, 1]. Output is [3, H * 2^levels, W * 2^levels].
inline Tensor generate_frame(const Tensor& refined, const WeightMap& weights,
                             const GeneratorConfig& cfg) {
    if (refined.rank() != 3) {
        throw ShapeError(detail::msg("generate_frame: input rank ", refined.rank(), ", want 3"));
    }
    if (refined.dim(0) != cfg.in_channels) {
        throw ShapeError(detail::msg("generate_frame: input channels ", refined.dim(0),
                                     ", configured ", cfg.in_channels));
    }
    Tensor x = relu(detail::conv3x3(refined, weights, "gen.in", cfg.in_channels, cfg.base_channels));
    int ch = cfg.base_channels;
    for (int l = 1; l <= cfg.levels; ++l) {
        x = relu(detail::conv3x3(upsample_nearest2x(x), weights, "gen.up" + std::to_string(l),
                                 ch, ch / 2));
        ch /= 2;
    }
    return sigmoid(detail::conv3x3(x, weights, "gen.out", ch, 3));
}

inline std::vector<std::pair<std::string, std::vector<int>>> vertex_weight_shapes(
    const VertexHeadConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    for (int i = 1; i <= cfg.blocks; ++i) {
        const std::string rb = "vertex.rb" + std::to_string(i);
        out.emplace_back(rb + ".c1.w", std::vector<int>{cfg.width, cfg.in_channels, 1, 1});
        out.emplace_back(rb + ".c1.b", std::vector<int>{cfg.width});
        out.emplace_back(rb + ".c2.w", std::vector<int>{cfg.width, cfg.width, 3, 3});
        out.emplace_back(rb + ".c2.b", std::vector<int>{cfg.width});
        out.emplace_back(rb + ".c3.w", std::vector<int>{cfg.in_channels, cfg.width, 1, 1});
        out.emplace_back(rb + ".c3.b", std::vector<int>{cfg.in_channels});
    }
    out.emplace_back("vertex.fc.w", std::vector<int>{2 * kVertexCount, cfg.in_channels});
    out.emplace_back("vertex.fc.b", std::vector<int>{2 * kVertexCount});
    return out;
}

// Channel-preserving bottleneck residual blocks, adaptive average pooling,
// then a fully connected map to the flattened 20950-vector; sigmoid bounds
// coordinates to [0, 1] and the row-major reshape gives vertex i its (x, y)
// in row i.
inline VertexSet predict_vertices(const Tensor& refined, const WeightMap& weights,
                                  const VertexHeadConfig& cfg) {
    if (refined.rank() != 3) {
        throw ShapeError(detail::msg("predict_vertices: input rank ", refined.rank(), ", want 3"));
    }
    if (refined.dim(0) != cfg.in_channels) {
        throw ShapeError(detail::msg("predict_vertices: input channels ", refined.dim(0),
                                     ", configured ", cfg.in_channels));
    }
    // Shape contract checked up front: the FC map must produce 2 * 10475.
    const Tensor& fc_w = fetch_weight(weights, "vertex.fc.w", {2 * kVertexCount, cfg.in_channels});
    const Tensor& fc_b = fetch_weight(weights, "vertex.fc.b", {2 * kVertexCount});

    Tensor x = refined;
    for (int i = 1; i <= cfg.blocks; ++i) {
        const std::string rb = "vertex.rb" + std::to_string(i);
        Tensor y = relu(conv2d(x, fetch_weight(weights, rb + ".c1.w", {cfg.width, cfg.in_channels, 1, 1}),
                               fetch_weight(weights, rb + ".c1.b", {cfg.width})));
        y = relu(detail::conv3x3(y, weights, rb + ".c2", cfg.width, cfg.width));
        y = conv2d(y, fetch_weight(weights, rb + ".c3.w", {cfg.in_channels, cfg.width, 1, 1}),
                   fetch_weight(weights, rb + ".c3.b", {cfg.in_channels}));
        x = relu(add(x, y));
    }
    const Tensor flat = sigmoid(linear(reduce_pool_adaptive(x), fc_w, fc_b));
    VertexSet out;
    out.coords = flat.reshaped({kVertexCount, 2});
    return out;
}

// ---------------------------------------------------------------------------
// Vertex set serialization: "S2DV" | count u32 LE | f32 LE (x, y) pairs
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> serialize_vertices(const VertexSet& v) {
    if (v.coords.rank() != 2 || v.coords.dim(0) != kVertexCount || v.coords.dim(1) != 2) {
        throw ShapeError(detail::msg("serialize_vertices: shape ", shape_str(v.coords), ", want [",
                                     kVertexCount, ",2]"));
    }
    std::vector<std::uint8_t> out = {'S', '2', 'D', 'V'};
    detail::put_u32(out, static_cast<std::uint32_t>(kVertexCount));
    for (std::int64_t i = 0; i < v.coords.size(); ++i) detail::put_f32(out, v.coords[i]);
    return out;
}

inline VertexSet parse_vertices(const std::uint8_t* data, std::size_t size) {
    detail::ByteReader r(data, size, "vertex file");
    const std::uint8_t* m = r.take(4);
    if (std::memcmp(m, "S2DV", 4) != 0) throw ParseError("vertex file: bad magic, expected S2DV");
    const std::uint32_t count = r.u32();
    if (count != static_cast<std::uint32_t>(kVertexCount)) {
        throw ParseError(detail::msg("vertex file: count ", count, ", want ", kVertexCount));
    }
    std::vector<float> values(2 * static_cast<std::size_t>(count));
    for (auto& v : values) v = r.f32();
    if (r.remaining() != 0) {
        throw ParseError(detail::msg("vertex file: ", r.remaining(), " trailing bytes"));
    }
    VertexSet out;
    out.coords = Tensor::from_data({kVertexCount, 2}, std::move(values));
    return out;
}

inline void save_vertices(const std::string& path, const VertexSet& v) {
    const auto bytes = serialize_vertices(v);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(detail::msg("cannot open ", path, " for writing"));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ParseError(detail::msg("write failed: ", path));
}

inline VertexSet load_vertices(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw ParseError(detail::msg("cannot open vertex file ", path));
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw ParseError(detail::msg("read failed: ", path));
    return parse_vertices(bytes.data(), bytes.size());
}

inline void save_vertices_csv(const std::string& path, const VertexSet& v) {
    std::ofstream f(path);
    if (!f) throw ParseError(detail::msg("cannot open ", path, " for writing"));
    f << "x,y\n";
    for (int i = 0; i < kVertexCount; ++i) {
        f << v.coords.at({i, 0}) << "," << v.coords.at({i, 1}) << "\n";
    }
}

}  // namespace s2d
