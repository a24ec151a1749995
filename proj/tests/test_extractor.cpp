#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "s2d/keypoint_extractor.hpp"

using namespace s2d;
using Catch::Approx;

namespace {

WeightMap zero_extractor_weights(const ExtractorConfig& cfg) {
    WeightMap w;
    for (const auto& [name, shape] : extractor_weight_shapes(cfg)) w.emplace(name, Tensor(shape));
    return w;
}

WeightMap random_extractor_weights(const ExtractorConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    WeightMap w;
    for (const auto& [name, shape] : extractor_weight_shapes(cfg)) {
        std::int64_t fan_in = 1;
        for (std::size_t a = 1; a < shape.size(); ++a) fan_in *= shape[a];
        const float lim = 1.0f / std::sqrt(static_cast<float>(fan_in));
        Tensor t(shape);
        if (shape.size() > 1) {
            for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-lim, lim);
        }
        w.emplace(name, std::move(t));
    }
    return w;
}

Tensor gradient_frame(int h, int w) {
    Tensor f({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            f.at({0, y, x}) = static_cast<float>(x) / w;
            f.at({1, y, x}) = static_cast<float>(y) / h;
            f.at({2, y, x}) = 0.5f * (f.at({0, y, x}) + f.at({1, y, x}));
        }
    }
    return f;
}

}  // namespace

TEST_CASE("downsample_frame block averages") {
    Rng rng(3);
    Tensor f = testutil::random_tensor({3, 8, 8}, rng);
    REQUIRE(testutil::bit_identical(downsample_frame(f, 1), f));

    Tensor block = Tensor::from_data({1, 2, 2}, {0.f, 2.f, 4.f, 6.f});
    Tensor down = downsample_frame(block, 2);
    REQUIRE(down.shape() == std::vector<int>{1, 1, 1});
    REQUIRE(down[0] == 3.0f);

    Tensor c({3, 6, 6}, 0.75f);
    Tensor dc = downsample_frame(c, 3);
    REQUIRE(dc.shape() == std::vector<int>{3, 2, 2});
    for (std::int64_t i = 0; i < dc.size(); ++i) REQUIRE(dc[i] == 0.75f);

    REQUIRE_THROWS_AS(downsample_frame(f, 3), ShapeError);
}

TEST_CASE("unet_forward zero weights give zero logits") {
    ExtractorConfig cfg;
    WeightMap w = zero_extractor_weights(cfg);
    Tensor frame({3, 32, 32}, 0.5f);
    Tensor logits = unet_forward(frame, w, cfg);
    REQUIRE(logits.shape() == std::vector<int>{15, 4, 32, 32});
    for (std::int64_t i = 0; i < logits.size(); ++i) REQUIRE(logits[i] == 0.0f);
}

TEST_CASE("unet_forward is deterministic on a fixed fixture") {
    ExtractorConfig cfg;
    WeightMap w = random_extractor_weights(cfg, 0);
    Tensor frame = gradient_frame(64, 64);
    Tensor a = unet_forward(downsample_frame(frame, 2), w, cfg);
    Tensor b = unet_forward(downsample_frame(frame, 2), w, cfg);
    REQUIRE(testutil::bit_identical(a, b));
}

TEST_CASE("unet_forward missing or misshapen weights name the tensor") {
    ExtractorConfig cfg;
    WeightMap w = zero_extractor_weights(cfg);
    w.erase("kp.up2.w");
    Tensor frame({3, 32, 32});
    REQUIRE_THROWS_WITH(unet_forward(frame, w, cfg), Catch::Matchers::ContainsSubstring("kp.up2.w"));

    WeightMap w2 = zero_extractor_weights(cfg);
    w2.at("kp.head.b") = Tensor({7});
    REQUIRE_THROWS_WITH(unet_forward(frame, w2, cfg), Catch::Matchers::ContainsSubstring("kp.head.b"));

    // spatial size not divisible by 2^levels
    WeightMap w3 = zero_extractor_weights(cfg);
    Tensor odd({3, 36, 36});
    REQUIRE_THROWS_AS(unet_forward(odd, w3, cfg), ShapeError);
}

TEST_CASE("doubling a head bias channel shifts exactly that keypoint uniformly") {
    ExtractorConfig cfg;
    WeightMap w = random_extractor_weights(cfg, 42);
    Tensor& bias = w.at("kp.head.b");
    for (std::int64_t i = 0; i < bias.size(); ++i) bias[i] = 0.25f + 0.01f * static_cast<float>(i);

    Tensor frame = downsample_frame(gradient_frame(64, 64), 2);
    Tensor base = unet_forward(frame, w, cfg);

    const int channel = 9;  // keypoint 2, depth slice 1
    const float delta = bias[channel];
    bias[channel] *= 2.0f;
    Tensor bumped = unet_forward(frame, w, cfg);

    const int k0 = channel / cfg.depth, d0 = channel % cfg.depth;
    for (int k = 0; k < cfg.keypoints; ++k) {
        for (int d = 0; d < cfg.depth; ++d) {
            for (int y = 0; y < 32; y += 7) {
                for (int x = 0; x < 32; x += 5) {
                    const float diff = bumped.at({k, d, y, x}) - base.at({k, d, y, x});
                    if (k == k0 && d == d0) {
                        REQUIRE(diff == Approx(delta).margin(1e-6));
                    } else {
                        REQUIRE(diff == 0.0f);
                    }
                }
            }
        }
    }
}

TEST_CASE("heatmaps_to_keypoints uniform logits land on the centroid") {
    Tensor logits({15, 4, 8, 8}, 1.25f);
    KeypointSet kps = heatmaps_to_keypoints(logits);
    REQUIRE(kps.count() == 15);
    for (const auto& p : kps.points) {
        REQUIRE(p[0] == Approx(0.0).margin(1e-7));
        REQUIRE(p[1] == Approx(0.0).margin(1e-7));
        REQUIRE(p[2] == Approx(0.0).margin(1e-7));
    }
}

TEST_CASE("heatmaps_to_keypoints saturates onto a single cell") {
    Tensor logits({1, 2, 4, 4});
    logits.at({0, 1, 2, 3}) = 1e4f;
    KeypointSet kps = heatmaps_to_keypoints(logits);
    REQUIRE(kps.points[0][0] == Approx(cell_center(3, 4)).margin(1e-4));
    REQUIRE(kps.points[0][1] == Approx(cell_center(2, 4)).margin(1e-4));
    REQUIRE(kps.points[0][2] == Approx(cell_center(1, 2)).margin(1e-4));
}

TEST_CASE("heatmaps_to_keypoints matches the brute-force cell sum") {
    Rng rng(17);
    Tensor logits = testutil::random_tensor({1, 2, 2, 2}, rng, -2.f, 2.f);
    KeypointSet kps = heatmaps_to_keypoints(logits);

    // direct softmax + weighted sum over all 8 cells
    double z = 0.0;
    for (int i = 0; i < 8; ++i) z += std::exp(static_cast<double>(logits[i]));
    double ex = 0.0, ey = 0.0, ez = 0.0;
    int i = 0;
    for (int d = 0; d < 2; ++d) {
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 2; ++x, ++i) {
                const double p = std::exp(static_cast<double>(logits[i])) / z;
                ex += p * cell_center(x, 2);
                ey += p * cell_center(y, 2);
                ez += p * cell_center(d, 2);
            }
        }
    }
    REQUIRE(kps.points[0][0] == Approx(ex).margin(1e-6));
    REQUIRE(kps.points[0][1] == Approx(ey).margin(1e-6));
    REQUIRE(kps.points[0][2] == Approx(ez).margin(1e-6));
}

TEST_CASE("normalized heatmap volumes sum to one per keypoint") {
    Rng rng(23);
    Tensor logits = testutil::random_tensor({15, 4, 8, 8}, rng, -10.f, 10.f);
    Tensor maps = normalize_heatmaps(logits);
    const std::int64_t cells = maps.size() / 15;
    for (int k = 0; k < 15; ++k) {
        double sum = 0.0;
        for (std::int64_t i = 0; i < cells; ++i) sum += maps[k * cells + i];
        REQUIRE(sum == Approx(1.0).margin(1e-5));
    }
}

TEST_CASE("translating a delta heatmap moves the keypoint one cell pitch") {
    // Delta-like: a localized two-cell blob over a floor that carries no
    // appreciable probability mass after the softmax.
    Tensor logits({1, 2, 4, 8}, -100.0f);
    logits.at({0, 1, 2, 3}) = 4.0f;
    logits.at({0, 1, 2, 2}) = 2.0f;
    KeypointSet a = heatmaps_to_keypoints(logits);

    Tensor shifted({1, 2, 4, 8}, -100.0f);
    shifted.at({0, 1, 2, 4}) = 4.0f;
    shifted.at({0, 1, 2, 3}) = 2.0f;
    KeypointSet b = heatmaps_to_keypoints(shifted);

    REQUIRE(b.points[0][0] - a.points[0][0] == Approx(2.0 / 8).margin(1e-6));
    REQUIRE(b.points[0][1] == Approx(a.points[0][1]).margin(1e-7));
    REQUIRE(b.points[0][2] == Approx(a.points[0][2]).margin(1e-7));
}

TEST_CASE("extract_keypoints composes the three stages") {
    ExtractorConfig cfg;
    WeightMap w = random_extractor_weights(cfg, 1);
    Tensor frame = gradient_frame(64, 64);

    KeypointSet direct = extract_keypoints(frame, 2, w, cfg);
    KeypointSet stepwise = heatmaps_to_keypoints(unet_forward(downsample_frame(frame, 2), w, cfg));
    REQUIRE(direct.count() == stepwise.count());
    for (int k = 0; k < direct.count(); ++k) {
        for (int a = 0; a < 3; ++a) {
            REQUIRE(direct.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] ==
                    stepwise.points[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)]);
        }
    }
}

TEST_CASE("uniform gray frame with zero weights gives centroid keypoints") {
    ExtractorConfig cfg;
    WeightMap w = zero_extractor_weights(cfg);
    Tensor frame({3, 64, 64}, 0.5f);
    KeypointSet kps = extract_keypoints(frame, 2, w, cfg);
    REQUIRE(kps.count() == 15);
    for (const auto& p : kps.points) {
        for (int a = 0; a < 3; ++a) REQUIRE(p[static_cast<std::size_t>(a)] == Approx(0.0).margin(1e-7));
    }
}

TEST_CASE("extracted coordinates always lie in [-1, 1]") {
    Rng rng(55);
    for (int seed = 0; seed < 20; ++seed) {
        Tensor logits = testutil::random_tensor({15, 4, 8, 8}, rng, -60.f, 60.f);
        KeypointSet kps = heatmaps_to_keypoints(logits);
        for (const auto& p : kps.points) {
            for (int a = 0; a < 3; ++a) {
                REQUIRE(p[static_cast<std::size_t>(a)] <= 1.0f);
                REQUIRE(p[static_cast<std::size_t>(a)] >= -1.0f);
            }
        }
    }
}
