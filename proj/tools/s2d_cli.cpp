// s2d command line: encode/decode keypoint-coded human video containers,
// inspect their contents, and report rate-distortion numbers. Also carries
// two harness helpers: deterministic weight-bundle generation and a
// synthetic test sequence writer.
//
// Exit codes: 0 success, 2 malformed input, 3 configuration or weight
// mismatch.

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "s2d/s2d.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CodecFlags {
    int keypoints = 15;
    int depth = 4;
    int q_log2 = 6;
    std::string fps = "25/1";
    std::uint64_t seed = 0;
};

s2d::ModelConfig config_from_flags(const CodecFlags& f) {
    s2d::ModelConfig cfg;
    cfg.extractor.keypoints = f.keypoints;
    cfg.extractor.depth = f.depth;
    cfg.q_log2 = f.q_log2;
    const auto slash = f.fps.find('/');
    if (slash == std::string::npos) {
        cfg.fps_num = std::stoi(f.fps);
        cfg.fps_den = 1;
    } else {
        cfg.fps_num = std::stoi(f.fps.substr(0, slash));
        cfg.fps_den = std::stoi(f.fps.substr(slash + 1));
    }
    cfg.validate();
    return cfg;
}

bool image_extension(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".png" || ext == ".ppm";
}

// A directory of rasters (sorted by name), a printf-style %d pattern, or a
// single file.
std::vector<std::string> resolve_frame_paths(const std::string& input) {
    std::vector<std::string> paths;
    if (input.find('%') != std::string::npos) {
        char buf[4096];
        for (int start : {0, 1}) {
            for (int i = start;; ++i) {
                std::snprintf(buf, sizeof(buf), input.c_str(), i);
                if (!fs::exists(buf)) break;
                paths.emplace_back(buf);
            }
            if (!paths.empty()) break;
        }
    } else if (fs::is_directory(input)) {
        for (const auto& entry : fs::directory_iterator(input)) {
            if (entry.is_regular_file() && image_extension(entry.path())) {
                paths.push_back(entry.path().string());
            }
        }
        std::sort(paths.begin(), paths.end());
    } else if (fs::exists(input)) {
        paths.push_back(input);
    }
    if (paths.empty()) {
        throw s2d::ParseError("no input frames found at " + input);
    }
    return paths;
}

std::string frame_name(int index, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06d.%s", index, ext.c_str());
    return buf;
}

int run_make_weights(const CodecFlags& flags, const std::string& out) {
    const s2d::ModelConfig cfg = config_from_flags(flags);
    s2d::save_weights(out, s2d::make_weights(flags.seed, cfg));
    std::cout << "wrote " << out << "\n";
    return 0;
}

int run_synth(int frames, int width, int height, const std::string& out_dir,
              const std::string& format) {
    fs::create_directories(out_dir);
    for (int i = 0; i < frames; ++i) {
        // gradient background with a blob orbiting at 1/120 turn per frame
        const double t = i / 120.0;
        s2d::Tensor f({3, height, width});
        const double cx = 0.5 + 0.25 * std::sin(6.2831853 * t);
        const double cy = 0.5 + 0.20 * std::cos(6.2831853 * t);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double u = (x + 0.5) / width, v = (y + 0.5) / height;
                const double d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
                const double blob = std::exp(-d2 / 0.01);
                f.at({0, y, x}) = static_cast<float>(std::min(1.0, 0.15 + 0.3 * u + 0.7 * blob));
                f.at({1, y, x}) = static_cast<float>(std::min(1.0, 0.2 + 0.3 * v + 0.5 * blob));
                f.at({2, y, x}) = static_cast<float>(std::min(1.0, 0.35 + 0.4 * blob));
            }
        }
        s2d::save_image((fs::path(out_dir) / frame_name(i, format)).string(), f);
    }
    std::cout << "wrote " << frames << " frames to " << out_dir << "\n";
    return 0;
}

int run_encode(const CodecFlags& flags, const std::string& input, const std::string& weights_path,
               const std::string& out, const std::string& keyframe_payload,
               const std::string& keyframe_image) {
    const s2d::ModelConfig cfg = config_from_flags(flags);
    const s2d::WeightMap weights = s2d::load_weights(weights_path);
    const std::vector<std::string> paths = resolve_frame_paths(input);

    s2d::FrameSource src;
    src.count = static_cast<int>(paths.size());
    src.frame = [&paths](int i) { return s2d::load_image(paths[static_cast<std::size_t>(i)]); };

    s2d::EncodeResult result;
    if (!keyframe_payload.empty()) {
        if (keyframe_image.empty()) {
            throw s2d::ParseError("--keyframe-payload requires --keyframe-image");
        }
        s2d::ExternalKeyframe ext;
        ext.payload = s2d::read_binary_file(keyframe_payload);
        ext.decoded = s2d::load_image(keyframe_image);
        result = s2d::encode_sequence(src, cfg, weights, &ext);
    } else {
        result = s2d::encode_sequence(src, cfg, weights);
    }
    s2d::write_binary_file(out, result.container);

    const s2d::RDReport& r = result.report;
    std::cout << "frames " << r.frame_count << ", total " << r.total_bits << " bits ("
              << r.keyframe_bits << " key, " << r.keypoint_bits << " keypoint records), "
              << r.kbps << " kbps\n";
    return 0;
}

int run_decode(const std::string& in, const std::string& weights_path,
               const std::string& frames_out, const std::string& vertices_out,
               const std::string& keyframe_image, const std::string& format, bool vertices_csv,
               const std::string& dump_motion) {
    const s2d::WeightMap weights = s2d::load_weights(weights_path);
    const auto bytes = s2d::read_binary_file(in);

    s2d::Tensor sidecar;
    const s2d::Tensor* sidecar_ptr = nullptr;
    if (!keyframe_image.empty()) {
        sidecar = s2d::load_image(keyframe_image);
        sidecar_ptr = &sidecar;
    }
    const s2d::ModelConfig cfg;  // desk-scale defaults; header overrides K/D/q/fps
    const s2d::DecodedSequence dec = s2d::decode_sequence(bytes.data(), bytes.size(), weights, cfg,
                                                          sidecar_ptr, !dump_motion.empty());

    fs::create_directories(frames_out);
    for (std::size_t i = 0; i < dec.frames.size(); ++i) {
        s2d::save_image((fs::path(frames_out) / frame_name(static_cast<int>(i), format)).string(),
                        dec.frames[i]);
    }
    fs::create_directories(vertices_out);
    for (std::size_t i = 0; i < dec.vertices.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "vert_%06d", static_cast<int>(i + 1));
        s2d::save_vertices((fs::path(vertices_out) / (std::string(buf) + ".s2dv")).string(),
                           dec.vertices[i]);
        if (vertices_csv) {
            s2d::save_vertices_csv((fs::path(vertices_out) / (std::string(buf) + ".csv")).string(),
                                   dec.vertices[i]);
        }
    }
    if (!dump_motion.empty()) {
        fs::create_directories(dump_motion);
        for (std::size_t i = 0; i < dec.flows.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%06d", static_cast<int>(i + 1));
            s2d::dump_raw_plane((fs::path(dump_motion) / ("flow_" + std::string(buf) + ".f32")).string(),
                                dec.flows[i]);
            s2d::dump_raw_plane((fs::path(dump_motion) / ("occ_" + std::string(buf) + ".f32")).string(),
                                dec.occlusions[i]);
        }
    }
    std::cout << "decoded " << dec.frames.size() << " frames, " << dec.vertices.size()
              << " vertex sets\n";
    return 0;
}

json container_report(const s2d::Container& c) {
    const s2d::ContainerHeader& h = c.header;
    json j;
    j["magic"] = "S2DC";
    j["version"] = h.version;
    j["width"] = h.width;
    j["height"] = h.height;
    j["keypoints"] = h.keypoints;
    j["q_log2"] = h.q_log2;
    j["depth"] = h.depth;
    j["fps"] = std::to_string(h.fps_num) + "/" + std::to_string(h.fps_den);
    j["keyframe_codec_tag"] = h.keyframe_codec_tag;
    j["keyframe_bytes"] = h.keyframe_payload.size();
    j["frame_count"] = c.records.size() + 1;
    json bits = json::array();
    for (const auto& rec : c.records) bits.push_back(8 * (4 + rec.size()));
    j["record_bits"] = bits;
    return j;
}

int run_inspect(const std::string& in) {
    const auto bytes = s2d::read_binary_file(in);
    const s2d::Container c = s2d::parse_container(bytes.data(), bytes.size());
    json j = container_report(c);
    j["total_bits"] = 8 * bytes.size();
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_rd_report(const std::string& in, const std::string& reference,
                  const std::string& weights_path, const std::string& keyframe_image) {
    const auto bytes = s2d::read_binary_file(in);
    const s2d::Container c = s2d::parse_container(bytes.data(), bytes.size());

    s2d::RDReport report;
    report.header_bits = 8 * static_cast<std::int64_t>(s2d::kContainerFixedHeaderBytes);
    report.keyframe_bits = 8 * static_cast<std::int64_t>(c.header.keyframe_payload.size());
    for (const auto& rec : c.records) {
        const std::int64_t bits = 8 * static_cast<std::int64_t>(4 + rec.size());
        report.per_frame_bits.push_back(bits);
        report.keypoint_bits += bits;
    }
    report.total_bits = 8 * static_cast<std::int64_t>(bytes.size());
    report.frame_count = static_cast<int>(c.records.size()) + 1;
    report.fps_num = c.header.fps_num;
    report.fps_den = c.header.fps_den;
    report.kbps = s2d::bitrate_kbps(report);

    json j;
    j["container"] = container_report(c);
    j["total_bits"] = report.total_bits;
    j["keypoint_bits"] = report.keypoint_bits;
    j["keyframe_bits"] = report.keyframe_bits;
    j["header_bits"] = report.header_bits;
    j["kbps"] = report.kbps;

    if (!reference.empty()) {
        if (weights_path.empty()) {
            throw s2d::ParseError("--reference needs --weights to reconstruct frames");
        }
        const s2d::WeightMap weights = s2d::load_weights(weights_path);
        s2d::Tensor sidecar;
        const s2d::Tensor* sidecar_ptr = nullptr;
        if (!keyframe_image.empty()) {
            sidecar = s2d::load_image(keyframe_image);
            sidecar_ptr = &sidecar;
        }
        const s2d::ModelConfig cfg;
        const s2d::DecodedSequence dec =
            s2d::decode_sequence(bytes.data(), bytes.size(), weights, cfg, sidecar_ptr);
        const std::vector<std::string> refs = resolve_frame_paths(reference);
        if (refs.size() != dec.frames.size()) {
            throw s2d::ParseError(s2d::detail::msg("reference has ", refs.size(), " frames, stream has ",
                                                   dec.frames.size()));
        }
        json psnr = json::array();
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const double v = s2d::psnr_sanity(dec.frames[i], s2d::load_image(refs[i]));
            // infinity (identical frames) serializes as null
            psnr.push_back(v);
        }
        j["psnr"] = psnr;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"s2d: sparse-keypoint human video codec"};
    app.require_subcommand(1);

    CodecFlags flags;

    auto* mkw = app.add_subcommand("make-weights", "generate a seeded weight bundle");
    std::string mkw_out;
    mkw->add_option("--seed", flags.seed, "RNG seed")->capture_default_str();
    mkw->add_option("--keypoints", flags.keypoints, "keypoints per frame")->capture_default_str();
    mkw->add_option("--depth", flags.depth, "motion volume depth")->capture_default_str();
    mkw->add_option("--out", mkw_out, "output .s2dw file")->required();

    auto* synth = app.add_subcommand("synth", "write a synthetic test sequence");
    int synth_frames = 30, synth_w = 64, synth_h = 64;
    std::string synth_out, synth_fmt = "png";
    synth->add_option("--frames", synth_frames, "frame count")->capture_default_str();
    synth->add_option("--width", synth_w, "frame width")->capture_default_str();
    synth->add_option("--height", synth_h, "frame height")->capture_default_str();
    synth->add_option("--format", synth_fmt, "png or ppm")->capture_default_str();
    synth->add_option("--out", synth_out, "output directory")->required();

    auto* enc = app.add_subcommand("encode", "encode frames into an s2d container");
    std::string enc_input, enc_weights, enc_out, enc_kf_payload, enc_kf_image;
    enc->add_option("--input", enc_input, "frame directory or printf pattern")->required();
    enc->add_option("--weights", enc_weights, "weight bundle")->required();
    enc->add_option("--out", enc_out, "output container")->required();
    enc->add_option("--q-log2", flags.q_log2, "quantization precision (step 2^-q)")
        ->capture_default_str();
    enc->add_option("--fps", flags.fps, "frame rate A/B")->capture_default_str();
    enc->add_option("--depth", flags.depth, "motion volume depth")->capture_default_str();
    enc->add_option("--keypoints", flags.keypoints, "keypoints per frame")->capture_default_str();
    enc->add_option("--keyframe-payload", enc_kf_payload,
                    "pre-encoded key frame payload (tag 1), carried opaquely");
    enc->add_option("--keyframe-image", enc_kf_image, "decoded image matching --keyframe-payload");

    auto* dec = app.add_subcommand("decode", "decode a container into frames and vertex sets");
    std::string dec_in, dec_weights, dec_frames, dec_vertices, dec_kf_image, dec_fmt = "png";
    std::string dec_dump_motion;
    bool dec_csv = false;
    dec->add_option("--in", dec_in, "input container")->required();
    dec->add_option("--weights", dec_weights, "weight bundle")->required();
    dec->add_option("--frames-out", dec_frames, "output frame directory")->required();
    dec->add_option("--vertices-out", dec_vertices, "output vertex directory")->required();
    dec->add_option("--keyframe-image", dec_kf_image, "sidecar image for tag-1 containers");
    dec->add_option("--format", dec_fmt, "png or ppm")->capture_default_str();
    dec->add_flag("--vertices-csv", dec_csv, "also write vertices as CSV");
    dec->add_option("--dump-motion", dec_dump_motion, "dump raw flow/occlusion planes here");

    auto* ins = app.add_subcommand("inspect", "print header and per-frame bits as JSON");
    std::string ins_in;
    ins->add_option("--in", ins_in, "input container")->required();

    auto* rd = app.add_subcommand("rd-report", "bit accounting, kbps and optional PSNR");
    std::string rd_in, rd_reference, rd_weights, rd_kf_image;
    rd->add_option("--in", rd_in, "input container")->required();
    rd->add_option("--reference", rd_reference, "reference frame directory or pattern");
    rd->add_option("--weights", rd_weights, "weight bundle (needed with --reference)");
    rd->add_option("--keyframe-image", rd_kf_image, "sidecar image for tag-1 containers");

    try {
        app.parse(argc, argv);
        if (mkw->parsed()) return run_make_weights(flags, mkw_out);
        if (synth->parsed()) return run_synth(synth_frames, synth_w, synth_h, synth_out, synth_fmt);
        if (enc->parsed()) {
            return run_encode(flags, enc_input, enc_weights, enc_out, enc_kf_payload, enc_kf_image);
        }
        if (dec->parsed()) {
            return run_decode(dec_in, dec_weights, dec_frames, dec_vertices, dec_kf_image, dec_fmt,
                              dec_csv, dec_dump_motion);
        }
        if (ins->parsed()) return run_inspect(ins_in);
        if (rd->parsed()) return run_rd_report(rd_in, rd_reference, rd_weights, rd_kf_image);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const s2d::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const s2d::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
