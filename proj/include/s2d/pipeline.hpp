#pragma once

// End-to-end orchestration: the encoder turns a frame sequence into an
// "S2DC" container (key frame payload + entropy-coded keypoint residuals),
// the decoder reverses it into synthesized frames and vertex sets, and the
// rate-distortion report accounts for every bit in between.
//
// The container carries what a conforming decoder must know about the
// stream (dimensions, K, q_log2, depth, fps, key frame); the remaining
// topology (scales, channel widths, sigma2) is shared model configuration
// and must match the weight bundle on both sides.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "s2d/container.hpp"
#include "s2d/image_io.hpp"
#include "s2d/keypoint_codec.hpp"
#include "s2d/keypoint_extractor.hpp"
#include "s2d/motion_engine.hpp"
#include "s2d/rng.hpp"
#include "s2d/synthesis.hpp"
#include "s2d/tensor.hpp"
#include "s2d/unet.hpp"
#include "s2d/weights.hpp"

namespace s2d {

struct ModelConfig {
    ExtractorConfig extractor;   // keypoints K, depth D, scale s, levels, base
    int feature_scale = 4;       // key frame -> texture feature downsampling
    int feature_channels = 8;    // C of the texture volume [C, D, H, W]
    MotionConfig motion;
    float sigma2 = 0.01f;        // Gaussian heatmap variance, normalized units
    int generator_base = 32;
    int generator_levels = 2;
    int vertex_blocks = 3;
    int vertex_width = 8;
    int q_log2 = 6;
    int fps_num = 25;
    int fps_den = 1;

    int keypoints() const { return extractor.keypoints; }
    int depth() const { return extractor.depth; }
    int coarse_channels() const { return (keypoints() + 1) * feature_channels; }

    GeneratorConfig generator() const {
        return GeneratorConfig{feature_channels, generator_base, generator_levels};
    }
    VertexHeadConfig vertex() const {
        return VertexHeadConfig{feature_channels, vertex_blocks, vertex_width};
    }

    // Frame dimensions must be a multiple of this.
    int frame_multiple() const {
        return std::lcm(extractor.scale << extractor.levels, feature_scale << motion.levels);
    }

    void validate() const {
        check_q_log2(q_log2);
        if (keypoints() < 1 || keypoints() > 255) {
            throw ShapeError(detail::msg("config: keypoints ", keypoints(), " outside [1, 255]"));
        }
        if (depth() < 1 || depth() > 255) {
            throw ShapeError(detail::msg("config: depth ", depth(), " outside [1, 255]"));
        }
        if (extractor.scale < 1) throw ShapeError("config: extractor scale < 1");
        if (feature_scale != (1 << generator_levels)) {
            throw ShapeError(detail::msg("config: feature_scale ", feature_scale,
                                         " must equal 2^generator_levels = ", 1 << generator_levels));
        }
        if (generator_base % (1 << generator_levels) != 0) {
            throw ShapeError("config: generator_base not divisible by 2^generator_levels");
        }
        if (!(sigma2 > 0.0f)) throw ShapeError("config: sigma2 <= 0");
        if (feature_channels < 1 || vertex_width < 1 || vertex_blocks < 0) {
            throw ShapeError("config: non-positive head sizes");
        }
        if (fps_num < 1 || fps_num > 0xffff || fps_den < 1 || fps_den > 0xffff) {
            throw ShapeError("config: fps fields must fit u16 and be positive");
        }
    }
};

// Every named tensor the full decoder bundle requires.
inline std::vector<std::pair<std::string, std::vector<int>>> bundle_weight_shapes(
    const ModelConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<int>>> out = extractor_weight_shapes(cfg.extractor);
    const int cd = cfg.feature_channels * cfg.depth();
    out.emplace_back("feat.c0.w", std::vector<int>{cd, 3, 3, 3});
    out.emplace_back("feat.c0.b", std::vector<int>{cd});
    out.emplace_back("feat.c1.w", std::vector<int>{cd, cd, 3, 3});
    out.emplace_back("feat.c1.b", std::vector<int>{cd});
    auto motion = motion_weight_shapes(cfg.motion, cfg.keypoints(), cfg.coarse_channels(), cfg.depth());
    out.insert(out.end(), motion.begin(), motion.end());
    auto gen = generator_weight_shapes(cfg.generator());
    out.insert(out.end(), gen.begin(), gen.end());
    auto vert = vertex_weight_shapes(cfg.vertex());
    out.insert(out.end(), vert.begin(), vert.end());
    return out;
}

// Seeded bundle: kernels uniform in +-1/sqrt(fan_in), biases zero.
inline WeightMap make_weights(std::uint64_t seed, const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(seed);
    WeightMap out;
    for (const auto& [name, shape] : bundle_weight_shapes(cfg)) {
        Tensor t(shape);
        if (shape.size() > 1) {
            std::int64_t fan_in = 1;
            for (std::size_t a = 1; a < shape.size(); ++a) fan_in *= shape[a];
            const float lim = 1.0f / std::sqrt(static_cast<float>(fan_in));
            for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-lim, lim);
        }
        out.emplace(name, std::move(t));
    }
    return out;
}

// Texture feature volume [C, D, H/fs, W/fs] of the decoded key frame.
inline Tensor texture_features(const Tensor& key_frame, const WeightMap& weights,
                               const ModelConfig& cfg) {
    const int cd = cfg.feature_channels * cfg.depth();
    Tensor x = downsample_frame(key_frame, cfg.feature_scale);
    x = relu(detail::conv3x3(x, weights, "feat.c0", 3, cd));
    x = relu(detail::conv3x3(x, weights, "feat.c1", cd, cd));
    return x.reshaped({cfg.feature_channels, cfg.depth(), x.dim(1), x.dim(2)});
}

struct FrameSource {
    int count = 0;
    std::function<Tensor(int)> frame;
};

struct RDReport {
    std::int64_t total_bits = 0;
    std::int64_t header_bits = 0;
    std::int64_t keyframe_bits = 0;
    std::int64_t keypoint_bits = 0;                // container records, framing included
    std::vector<std::int64_t> per_frame_bits;      // per inter-frame record, 8 * (4 + len)
    std::vector<std::int64_t> per_frame_coded_bits;  // exact arithmetic-coded bits
    int frame_count = 0;
    int fps_num = 25;
    int fps_den = 1;
    double kbps = 0.0;
    std::vector<double> psnr;  // optional per-frame sanity values
};

inline double bitrate_kbps(std::int64_t bits, int frames, int fps_num, int fps_den) {
    if (frames <= 0) throw ShapeError("bitrate_kbps: zero frames");
    if (fps_num <= 0 || fps_den <= 0) throw ShapeError("bitrate_kbps: fps not set");
    return static_cast<double>(bits) * fps_num / (static_cast<double>(fps_den) * frames * 1000.0);
}

inline double bitrate_kbps(const RDReport& report) {
    return bitrate_kbps(report.total_bits, report.frame_count, report.fps_num, report.fps_den);
}

// 10*log10(1/MSE) over [0,1] pixels; +infinity for identical frames.
inline double psnr_sanity(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError(detail::msg("psnr_sanity: shape ", shape_str(a), " vs ", shape_str(b)));
    }
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

// Pre-encoded key frame carried opaquely (tag 1) with its decoded image.
struct ExternalKeyframe {
    std::vector<std::uint8_t> payload;
    Tensor decoded;
};

struct EncodeResult {
    std::vector<std::uint8_t> container;
    RDReport report;
    std::vector<QuantizedKeypointSet> coded_keypoints;  // entry 0 seeds the predictor
};

namespace detail {

inline void check_frame_geometry(const Tensor& frame, const ModelConfig& cfg, int index) {
    if (frame.rank() != 3 || frame.dim(0) != 3) {
        throw ParseError(msg("frame ", index, ": shape ", shape_str(frame), ", want [3,H,W]"));
    }
    const int mult = cfg.frame_multiple();
    if (frame.dim(1) % mult != 0 || frame.dim(2) % mult != 0) {
        throw ShapeError(msg("frame ", index, ": size ", frame.dim(1), "x", frame.dim(2),
                             " not a multiple of ", mult));
    }
}

}  // namespace detail

inline EncodeResult encode_sequence(const FrameSource& src, const ModelConfig& cfg,
                                    const WeightMap& weights,
                                    const ExternalKeyframe* external = nullptr) {
    cfg.validate();
    if (src.count < 1) throw ParseError("encode_sequence: empty frame source");

    const Tensor first = src.frame(0);
    detail::check_frame_geometry(first, cfg, 0);
    if (first.dim(1) > 0xffff || first.dim(2) > 0xffff) {
        throw ShapeError(detail::msg("encode_sequence: frame size ", first.dim(1), "x", first.dim(2),
                                     " exceeds container limits"));
    }

    Container container;
    ContainerHeader& h = container.header;
    h.width = static_cast<std::uint16_t>(first.dim(2));
    h.height = static_cast<std::uint16_t>(first.dim(1));
    h.keypoints = static_cast<std::uint8_t>(cfg.keypoints());
    h.q_log2 = static_cast<std::uint8_t>(cfg.q_log2);
    h.depth = static_cast<std::uint8_t>(cfg.depth());
    h.fps_num = static_cast<std::uint16_t>(cfg.fps_num);
    h.fps_den = static_cast<std::uint16_t>(cfg.fps_den);

    Tensor decoded_key;
    if (external != nullptr) {
        h.keyframe_codec_tag = kKeyframeExternal;
        h.keyframe_payload = external->payload;
        decoded_key = external->decoded;
        if (!decoded_key.same_shape(first)) {
            throw ShapeError(detail::msg("encode_sequence: external keyframe image ",
                                         shape_str(decoded_key), " vs frame 0 ", shape_str(first)));
        }
    } else {
        h.keyframe_codec_tag = kKeyframePng;
        h.keyframe_payload = encode_png(first);
        // The predictor seed must come from the decoded payload, exactly as
        // the decoder will see it.
        decoded_key = decode_png(h.keyframe_payload.data(), h.keyframe_payload.size());
    }

    EncodeResult result;
    QuantizedKeypointSet previous =
        quantize(extract_keypoints(decoded_key, cfg.extractor.scale, weights, cfg.extractor),
                 cfg.q_log2);
    result.coded_keypoints.push_back(previous);

    CoderState state;
    RDReport& report = result.report;
    for (int i = 1; i < src.count; ++i) {
        const Tensor frame = src.frame(i);
        if (!frame.same_shape(first)) {
            throw ParseError(detail::msg("encode_sequence: frame ", i, " size ", shape_str(frame),
                                         " differs from frame 0 ", shape_str(first)));
        }
        const QuantizedKeypointSet current =
            quantize(extract_keypoints(frame, cfg.extractor.scale, weights, cfg.extractor),
                     cfg.q_log2);
        const KeypointBitstream bits = encode_frame(predict_residual(current, previous), state);
        report.per_frame_coded_bits.push_back(bits.bit_count);
        report.per_frame_bits.push_back(8 * static_cast<std::int64_t>(4 + bits.bytes.size()));
        container.records.push_back(bits.bytes);
        result.coded_keypoints.push_back(current);
        previous = current;
    }

    result.container = serialize_container(container);
    report.header_bits = 8 * static_cast<std::int64_t>(kContainerFixedHeaderBytes);
    report.keyframe_bits = 8 * static_cast<std::int64_t>(h.keyframe_payload.size());
    for (std::int64_t b : report.per_frame_bits) report.keypoint_bits += b;
    report.total_bits = 8 * static_cast<std::int64_t>(result.container.size());
    report.frame_count = src.count;
    report.fps_num = cfg.fps_num;
    report.fps_den = cfg.fps_den;
    report.kbps = bitrate_kbps(report);
    return result;
}

struct DecodedSequence {
    ContainerHeader header;
    std::vector<Tensor> frames;                   // entry 0 is the decoded key frame
    std::vector<VertexSet> vertices;              // one per inter frame
    std::vector<QuantizedKeypointSet> keypoints;  // entry 0 seeds the predictor
    std::vector<Tensor> flows;                    // populated when keep_motion is set
    std::vector<Tensor> occlusions;
};

inline DecodedSequence decode_sequence(const std::uint8_t* data, std::size_t size,
                                       const WeightMap& weights, const ModelConfig& base_cfg,
                                       const Tensor* keyframe_sidecar = nullptr,
                                       bool keep_motion = false) {
    const Container container = parse_container(data, size);
    const ContainerHeader& h = container.header;

    ModelConfig cfg = base_cfg;
    cfg.extractor.keypoints = h.keypoints;
    cfg.extractor.depth = h.depth;
    cfg.q_log2 = h.q_log2;
    cfg.fps_num = h.fps_num;
    cfg.fps_den = h.fps_den;
    cfg.validate();

    DecodedSequence out;
    out.header = h;

    Tensor decoded_key;
    if (h.keyframe_codec_tag == kKeyframePng) {
        decoded_key = decode_png(h.keyframe_payload.data(), h.keyframe_payload.size());
    } else {
        if (keyframe_sidecar == nullptr) {
            throw ParseError("decode_sequence: external keyframe payload needs a sidecar image");
        }
        decoded_key = *keyframe_sidecar;
    }
    if (decoded_key.rank() != 3 || decoded_key.dim(0) != 3 || decoded_key.dim(1) != h.height ||
        decoded_key.dim(2) != h.width) {
        throw ParseError(detail::msg("decode_sequence: key frame ", shape_str(decoded_key),
                                     " does not match header ", h.height, "x", h.width));
    }
    detail::check_frame_geometry(decoded_key, cfg, 0);

    const Tensor texture = texture_features(decoded_key, weights, cfg);
    const GridShape grid{cfg.depth(), texture.dim(2), texture.dim(3)};

    QuantizedKeypointSet previous =
        quantize(extract_keypoints(decoded_key, cfg.extractor.scale, weights, cfg.extractor),
                 cfg.q_log2);
    const KeypointSet kp_ref = dequantize(previous, cfg.q_log2);

    out.frames.push_back(decoded_key);
    out.keypoints.push_back(previous);

    const std::int32_t max_index = 1 << cfg.q_log2;
    CoderState state;
    for (const auto& record : container.records) {
        KeypointBitstream bits;
        bits.bytes = record;
        bits.bit_count = 8 * static_cast<std::int64_t>(record.size());
        const ResidualSet residuals = decode_frame(bits, state, cfg.keypoints());
        const QuantizedKeypointSet current = apply_residual(residuals, previous);
        for (const auto& p : current.points) {
            for (int a = 0; a < 3; ++a) {
                if (p[static_cast<std::size_t>(a)] > max_index ||
                    p[static_cast<std::size_t>(a)] < -max_index) {
                    throw ParseError(detail::msg("decode_sequence: keypoint index ",
                                                 p[static_cast<std::size_t>(a)],
                                                 " outside quantized range +-", max_index));
                }
            }
        }
        const KeypointSet kp_inter = dequantize(current, cfg.q_log2);

        const SparseMotionField sparse = sparse_motion(kp_ref, kp_inter, grid);
        const Tensor diff = heatmap_difference(kp_ref, kp_inter, grid, cfg.sigma2);
        const Tensor coarse = coarse_deform(texture, sparse);
        const DenseMotion motion = dense_motion(diff, coarse, weights, cfg.motion);
        const Tensor flow = compose_flow(motion.mask, sparse);
        const Tensor refined = refine_feature(texture, flow, motion.occlusion);

        out.frames.push_back(generate_frame(refined, weights, cfg.generator()));
        out.vertices.push_back(predict_vertices(refined, weights, cfg.vertex()));
        out.keypoints.push_back(current);
        if (keep_motion) {
            out.flows.push_back(flow);
            out.occlusions.push_back(motion.occlusion);
        }
        previous = current;
    }
    return out;
}

}  // namespace s2d
