// Rate-distortion harness cross-check at the full test scale: a 150-frame
// 384x384 synthetic sequence, encoded twice over — once through
// encode_sequence and once through measure_bits on independently extracted
// keypoints — must agree bit for bit. Runs for a couple of minutes; kept
// out of the fast unit binary.

#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "helpers.hpp"
#include "s2d/pipeline.hpp"

using namespace s2d;
using Catch::Approx;

TEST_CASE("150-frame 384x384 sequence: encoder bits cross-check against measure_bits") {
    ModelConfig cfg;  // desk-scale defaults, 25/1 fps, q_log2 = 6
    const WeightMap weights = make_weights(0, cfg);

    FrameSource src;
    src.count = 150;
    src.frame = [](int i) { return testutil::synthetic_frame(384, 384, i / 150.0); };

    const EncodeResult enc = encode_sequence(src, cfg, weights);
    REQUIRE(enc.report.frame_count == 150);
    REQUIRE(enc.report.per_frame_coded_bits.size() == 149);

    // Independent bit-count oracle: extract the keypoint sequence ourselves
    // and run it through the measurement path. The key frame's keypoints
    // come from the decoded PNG payload, exactly as both codec ends see it.
    const Container container = parse_container(enc.container.data(), enc.container.size());
    std::vector<KeypointSet> poses;
    poses.push_back(extract_keypoints(
        decode_png(container.header.keyframe_payload.data(), container.header.keyframe_payload.size()),
        cfg.extractor.scale, weights, cfg.extractor));
    for (int i = 1; i < 150; ++i) {
        poses.push_back(extract_keypoints(src.frame(i), cfg.extractor.scale, weights, cfg.extractor));
    }
    const BitReport oracle = measure_bits(poses, cfg.q_log2);

    REQUIRE(oracle.per_frame_bits.size() == 150);
    std::int64_t encoder_total = 0;
    for (std::size_t i = 0; i < enc.report.per_frame_coded_bits.size(); ++i) {
        REQUIRE(enc.report.per_frame_coded_bits[i] == oracle.per_frame_bits[i + 1]);
        encoder_total += enc.report.per_frame_coded_bits[i];
    }
    REQUIRE(encoder_total == oracle.total_bits);

    // keypoint-stream rate: total_keypoint_bits * fps / 150 / 1000
    const double stream_kbps = static_cast<double>(oracle.total_bits) * 25.0 / 150.0 / 1000.0;
    REQUIRE(stream_kbps == Approx(bitrate_kbps(oracle.total_bits, 150, 25, 1)).margin(1e-12));
    // the sparse keypoint stream must stay in the ultra-low-rate regime
    REQUIRE(stream_kbps < 5.0);

    // whole-container accounting holds at this scale too
    REQUIRE(enc.report.total_bits ==
            enc.report.header_bits + enc.report.keyframe_bits + enc.report.keypoint_bits);
}
