#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "s2d/tensor.hpp"

using namespace s2d;
using Catch::Approx;

TEST_CASE("tensor basics") {
    Tensor t({2, 3}, 1.5f);
    REQUIRE(t.size() == 6);
    REQUIRE(t.at({1, 2}) == 1.5f);

    REQUIRE_THROWS_AS(Tensor::from_data({2, 2}, {1.f, 2.f, 3.f}), ShapeError);
    REQUIRE_THROWS_AS(t.reshaped({5}), ShapeError);
    REQUIRE(t.reshaped({3, 2}).size() == 6);
    REQUIRE_THROWS_AS(Tensor({0, 3}), ShapeError);
}

TEST_CASE("grid_sample identity is exact") {
    Rng rng(11);
    Tensor input = testutil::random_tensor({2, 4, 8, 8}, rng, -5.f, 5.f);
    Tensor out = grid_sample(input, SampleGrid::identity(4, 8, 8));
    REQUIRE(testutil::bit_identical(out, input));

    // Planar, including a non-power-of-two size.
    Tensor img = testutil::random_tensor({3, 6, 10}, rng, -5.f, 5.f);
    Tensor out2 = grid_sample(img, SampleGrid::identity_planar(6, 10));
    REQUIRE(testutil::bit_identical(out2, img));
}

TEST_CASE("grid_sample one-cell shift clamps at the border") {
    Tensor input = Tensor::from_data({1, 1, 4}, {1.f, 2.f, 3.f, 4.f});
    SampleGrid grid = SampleGrid::identity_planar(1, 4);
    for (int x = 0; x < 4; ++x) grid.coords.at({0, x, 0}) += 0.5f;  // one cell width = 2/4
    Tensor out = grid_sample(input, grid);
    REQUIRE(out[0] == 2.f);
    REQUIRE(out[1] == 3.f);
    REQUIRE(out[2] == 4.f);
    REQUIRE(out[3] == 4.f);
}

TEST_CASE("grid_sample clamps far out-of-range coordinates to the border") {
    Tensor input = Tensor::from_data({1, 1, 4}, {1.f, 2.f, 3.f, 4.f});
    SampleGrid grid = SampleGrid::identity_planar(1, 4);
    grid.coords.at({0, 0, 0}) = 1.5f;
    grid.coords.at({0, 1, 0}) = -2.25f;
    Tensor out = grid_sample(input, grid);
    REQUIRE(out[0] == 4.f);
    REQUIRE(out[1] == 1.f);
}

TEST_CASE("grid_sample matches the interpolation oracle on random grids") {
    Rng rng(202);
    for (int seed = 0; seed < 50; ++seed) {
        Tensor input = testutil::random_tensor({2, 5, 7}, rng, -3.f, 3.f);
        Tensor grid = testutil::random_tensor({5, 7, 2}, rng, -1.3f, 1.3f);
        Tensor got = grid_sample(input, grid);
        Tensor want = testutil::grid_sample_planar_oracle(input, grid);
        REQUIRE(testutil::max_abs_diff(got, want) < 1e-6);
    }
    for (int seed = 0; seed < 25; ++seed) {
        Tensor input = testutil::random_tensor({2, 3, 4, 6}, rng, -3.f, 3.f);
        Tensor grid = testutil::random_tensor({3, 4, 6, 3}, rng, -1.3f, 1.3f);
        Tensor got = grid_sample(input, grid);
        Tensor want = testutil::grid_sample_volume_oracle(input, grid);
        REQUIRE(testutil::max_abs_diff(got, want) < 1e-6);
    }
}

TEST_CASE("grid_sample shape mismatch names the axis") {
    Tensor input({1, 4, 4});
    SampleGrid grid = SampleGrid::identity_planar(4, 8);
    REQUIRE_THROWS_WITH(grid_sample(input, grid), Catch::Matchers::ContainsSubstring("width"));
}

TEST_CASE("conv2d identity and constant cases") {
    Rng rng(7);
    Tensor input = testutil::random_tensor({3, 6, 6}, rng);

    Tensor id_w({3, 3, 1, 1});
    for (int k = 0; k < 3; ++k) id_w.at({k, k, 0, 0}) = 1.0f;
    Tensor zero_b({3});
    REQUIRE(testutil::bit_identical(conv2d(input, id_w, zero_b), input));

    Tensor zero_w({2, 3, 3, 3});
    Tensor bias = Tensor::from_data({2}, {0.25f, -4.f});
    Tensor out = conv2d(input, zero_w, bias, 1, 1);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) {
            REQUIRE(out.at({0, y, x}) == 0.25f);
            REQUIRE(out.at({1, y, x}) == -4.f);
        }
    }
}

TEST_CASE("conv2d random 3x3 matches the nested-loop oracle") {
    Rng rng(13);
    Tensor input = testutil::random_tensor({1, 5, 5}, rng);
    Tensor w = testutil::random_tensor({1, 1, 3, 3}, rng);
    Tensor b = testutil::random_tensor({1}, rng);
    Tensor got = conv2d(input, w, b, 1, 1);
    Tensor want = testutil::conv2d_oracle(input, w, b, 1, 1);
    REQUIRE(got.shape() == std::vector<int>{1, 5, 5});
    REQUIRE(testutil::max_abs_diff(got, want) < 1e-6);
}

TEST_CASE("conv2d and linear agree with oracles on randomized shapes") {
    Rng rng(99);
    for (int valid = 0; valid < 100;) {
        const int C = 1 + static_cast<int>(rng.next_below(3));
        const int K = 1 + static_cast<int>(rng.next_below(4));
        const int H = 3 + static_cast<int>(rng.next_below(6));
        const int W = 3 + static_cast<int>(rng.next_below(6));
        const int k = 1 + 2 * static_cast<int>(rng.next_below(2));  // 1 or 3
        const int pad = static_cast<int>(rng.next_below(2));
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        if ((H + 2 * pad - k) % stride != 0 || (W + 2 * pad - k) % stride != 0) continue;
        if (H + 2 * pad < k || W + 2 * pad < k) continue;
        ++valid;
        Tensor input = testutil::random_tensor({C, H, W}, rng);
        Tensor w = testutil::random_tensor({K, C, k, k}, rng);
        Tensor b = testutil::random_tensor({K}, rng);
        Tensor got = conv2d(input, w, b, stride, pad);
        Tensor want = testutil::conv2d_oracle(input, w, b, stride, pad);
        REQUIRE(testutil::max_abs_diff(got, want) < 1e-6);

        const int M = 1 + static_cast<int>(rng.next_below(8));
        const int N = 1 + static_cast<int>(rng.next_below(8));
        Tensor x = testutil::random_tensor({N}, rng);
        Tensor lw = testutil::random_tensor({M, N}, rng);
        Tensor lb = testutil::random_tensor({M}, rng);
        REQUIRE(testutil::max_abs_diff(linear(x, lw, lb), testutil::linear_oracle(x, lw, lb)) < 1e-6);
    }
}

TEST_CASE("conv2d rejects non-integer output sizes") {
    Tensor input({1, 5, 5});
    Tensor w({1, 1, 2, 2});
    Tensor b({1});
    REQUIRE_THROWS_AS(conv2d(input, w, b, 2, 0), ShapeError);
    REQUIRE_THROWS_AS(conv2d(input, w, b, 1, -1), ShapeError);
    Tensor big({1, 1, 9, 9});
    REQUIRE_THROWS_AS(conv2d(input, big, b, 1, 1), ShapeError);
}

TEST_CASE("linear identity, constant and mismatch cases") {
    Tensor x = Tensor::from_data({3}, {1.f, -2.f, 3.f});
    Tensor id = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor zero3({3});
    REQUIRE(testutil::bit_identical(linear(x, id, zero3), x));

    Tensor zw({2, 3});
    Tensor zb = Tensor::from_data({2}, {5.f, -1.f});
    Tensor out = linear(x, zw, zb);
    REQUIRE(out[0] == 5.f);
    REQUIRE(out[1] == -1.f);

    Tensor wrong({2, 4});
    REQUIRE_THROWS_AS(linear(x, wrong, zb), ShapeError);
}

TEST_CASE("linear random 4x3 matches the dot-product oracle") {
    Rng rng(4242);
    Tensor x = testutil::random_tensor({3}, rng);
    Tensor w = testutil::random_tensor({4, 3}, rng);
    Tensor b = testutil::random_tensor({4}, rng);
    REQUIRE(testutil::max_abs_diff(linear(x, w, b), testutil::linear_oracle(x, w, b)) < 1e-6);
}

TEST_CASE("softmax_axis basics") {
    Tensor c({2, 5}, 3.25f);
    Tensor out = softmax_axis(c, 1);
    for (std::int64_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == Approx(0.2).epsilon(1e-6));

    // Max-subtraction keeps a +1000 spike finite and saturated.
    Tensor spike = Tensor::from_data({3}, {0.f, 1000.f, 0.f});
    Tensor s = softmax_axis(spike, 0);
    REQUIRE(std::isfinite(s[1]));
    REQUIRE(s[1] == Approx(1.0).margin(1e-6));

    Tensor v = Tensor::from_data({3}, {0.3f, -1.2f, 0.7f});
    Tensor got = softmax_axis(v, 0);
    double e0 = std::exp(0.3 - 0.7), e1 = std::exp(-1.2 - 0.7), e2 = 1.0;
    const double z = e0 + e1 + e2;
    REQUIRE(got[0] == Approx(e0 / z).margin(1e-7));
    REQUIRE(got[1] == Approx(e1 / z).margin(1e-7));
    REQUIRE(got[2] == Approx(e2 / z).margin(1e-7));

    REQUIRE_THROWS_AS(softmax_axis(v, 1), ShapeError);
}

TEST_CASE("softmax_axis slices sum to one for arbitrary finite input") {
    Rng rng(31);
    for (int seed = 0; seed < 50; ++seed) {
        Tensor t = testutil::random_tensor({3, 4, 5}, rng, -80.f, 80.f);
        const int axis = static_cast<int>(rng.next_below(3));
        Tensor s = softmax_axis(t, axis);
        std::int64_t outer = 1, inner = 1;
        for (int a = 0; a < axis; ++a) outer *= t.dim(a);
        for (int a = axis + 1; a < t.rank(); ++a) inner *= t.dim(a);
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t i = 0; i < inner; ++i) {
                double sum = 0.0;
                for (int j = 0; j < t.dim(axis); ++j) sum += s[(o * t.dim(axis) + j) * inner + i];
                REQUIRE(sum == Approx(1.0).margin(1e-6));
            }
        }
    }
}

TEST_CASE("reduce_pool_adaptive") {
    Tensor c({2, 3, 3}, 1.75f);
    Tensor out = reduce_pool_adaptive(c);
    REQUIRE(out[0] == 1.75f);
    REQUIRE(out[1] == 1.75f);

    Tensor q = Tensor::from_data({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
    REQUIRE(reduce_pool_adaptive(q)[0] == 2.5f);

    Tensor px = Tensor::from_data({1, 1, 1}, {-0.625f});
    REQUIRE(reduce_pool_adaptive(px)[0] == -0.625f);
}

TEST_CASE("elementwise operations") {
    Rng rng(5);
    Tensor x = testutil::random_tensor({2, 3, 4}, rng);
    Tensor ones({2, 3, 4}, 1.0f);
    REQUIRE(testutil::bit_identical(hadamard(x, ones), x));

    Tensor r = relu(Tensor::from_data({3}, {-1.f, 0.f, 2.f}));
    REQUIRE(r[0] == 0.f);
    REQUIRE(r[1] == 0.f);
    REQUIRE(r[2] == 2.f);

    Tensor a = testutil::random_tensor({2, 3, 3}, rng);
    Tensor b = testutil::random_tensor({3, 3, 3}, rng);
    Tensor cat = concat_channels(a, b);
    REQUIRE(cat.shape() == std::vector<int>{5, 3, 3});
    for (std::int64_t i = 0; i < a.size(); ++i) REQUIRE(cat[i] == a[i]);
    for (std::int64_t i = 0; i < b.size(); ++i) REQUIRE(cat[a.size() + i] == b[i]);

    // channel-wise broadcast of a [1,H,W] factor
    Tensor gate = testutil::random_tensor({1, 3, 3}, rng);
    Tensor gated = hadamard(b, gate);
    for (int c = 0; c < 3; ++c) {
        for (std::int64_t i = 0; i < 9; ++i) {
            REQUIRE(gated[c * 9 + i] == b[c * 9 + i] * gate[i]);
        }
    }

    REQUIRE_THROWS_AS(add(a, b), ShapeError);
    Tensor odd({2, 4, 3});
    REQUIRE_THROWS_AS(concat_channels(a, odd), ShapeError);
    REQUIRE_THROWS_AS(hadamard(a, odd), ShapeError);

    // enum-dispatch surface
    REQUIRE(testutil::bit_identical(elementwise(x, &ones, Elementwise::Hadamard), x));
    REQUIRE(testutil::bit_identical(elementwise(x, nullptr, Elementwise::Relu), relu(x)));
    REQUIRE_THROWS_AS(elementwise(x, nullptr, Elementwise::Add), ShapeError);
}

TEST_CASE("operations are deterministic across repeated runs") {
    Rng rng1(77), rng2(77);
    Tensor a1 = testutil::random_tensor({3, 8, 8}, rng1);
    Tensor a2 = testutil::random_tensor({3, 8, 8}, rng2);
    Tensor w1 = testutil::random_tensor({4, 3, 3, 3}, rng1);
    Tensor w2 = testutil::random_tensor({4, 3, 3, 3}, rng2);
    Tensor b1 = testutil::random_tensor({4}, rng1);
    Tensor b2 = testutil::random_tensor({4}, rng2);
    REQUIRE(testutil::bit_identical(conv2d(a1, w1, b1, 1, 1), conv2d(a2, w2, b2, 1, 1)));
    REQUIRE(testutil::bit_identical(softmax_axis(a1, 2), softmax_axis(a2, 2)));
}
