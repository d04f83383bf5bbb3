#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dfdepth/decoder.hpp"
#include "dfdepth/encoder.hpp"
#include "dfdepth/fusion.hpp"
#include "oracles.hpp"

using namespace dfdepth;

TEST_CASE("upsample block doubles the spatial dims") {
    Rng rng(1);
    UpsampleBlockParams block(64, 32, rng);
    Tensor out = upsample_block(oracles::random_tensor({64, 16, 16}, rng), block, true);
    CHECK(out.shape() == Shape{32, 32, 32});
    CHECK_THROWS_AS(upsample_block(Tensor::zeros({16, 4, 4}), block, true), std::invalid_argument);
}

TEST_CASE("zero input yields the bias-determined constant map") {
    Rng rng(2);
    UpsampleBlockParams block(4, 2, rng);
    Tensor out = upsample_block(Tensor::zeros({4, 4, 4}), block, true);
    // Zero pre-BN activations normalize to beta (init 0) and ReLU keeps 0.
    const double first = out.data()[0];
    for (double v : out.data()) CHECK(v == doctest::Approx(first));
    CHECK(first == doctest::Approx(0.0));
}

TEST_CASE("upsample block gradient matches finite differences") {
    Rng rng(3);
    UpsampleBlockParams block(2, 2, rng);
    Tensor x = oracles::random_tensor({1, 2, 3, 3}, rng, -1, 1, true);
    Tensor w = oracles::random_tensor({1, 2, 6, 6}, rng);
    auto eval = [&] { return sum(mul(upsample_block(x, block, true), w)).item(); };
    backward(sum(mul(upsample_block(x, block, true), w)));
    CHECK(oracles::max_grad_error(eval, {x, block.tconv, block.bn.gamma, block.bn.beta}) < 1e-6);
}

TEST_CASE("decode restores the recorded resolution and stays in [0,1]") {
    Rng rng(4);
    DecoderParams dec(64, 2, rng);
    FeatureMatrix fused{oracles::random_tensor({64, 16, 16}, rng, -2, 2), FeatureTag::fused};
    DepthMap depth = decode(fused, dec, 10.0, 64, 64);
    CHECK(depth.values.shape() == Shape{1, 64, 64});
    CHECK(depth.depth_scale == 10.0);
    for (double v : depth.values.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    FeatureMatrix wrong_tag{fused.values, FeatureTag::spatial};
    CHECK_THROWS_AS(decode(wrong_tag, dec, 10.0, 64, 64), std::invalid_argument);
    CHECK_THROWS_AS(decode(fused, dec, 10.0, 32, 32), std::invalid_argument);
}

TEST_CASE("zeroed refinement conv forces the 0.5 map") {
    Rng rng(5);
    DecoderParams dec(8, 2, rng);
    dec.refine.set_data(std::vector<double>(dec.refine.size(), 0.0));
    dec.refine_bias.set_data({0.0});
    FeatureMatrix fused{oracles::random_tensor({8, 4, 4}, rng), FeatureTag::fused};
    DepthMap depth = decode(fused, dec, 10.0, 16, 16);
    for (double v : depth.values.data()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("encode-fuse-decode restores every configured size") {
    for (int size : {32, 64, 128}) {
        Rng rng(static_cast<std::uint64_t>(size));
        EncoderParams enc_s(3, 16, 2, FeatureTag::spatial, rng);
        EncoderParams enc_f(2, 16, 2, FeatureTag::frequency, rng);
        DecoderParams dec(16, 2, rng);
        FeatureMatrix fs = encode(oracles::random_tensor({3, size, size}, rng), enc_s);
        FeatureMatrix ff = encode(oracles::random_tensor({2, size, size}, rng), enc_f);
        DepthMap depth = decode(fuse(ff, fs), dec, 10.0, size, size);
        CHECK(depth.values.shape() == Shape{1, size, size});
    }
}

TEST_CASE("u16 export follows the rounding convention") {
    DepthMap d{Tensor::from_data({1, 1, 3}, {0.0, 0.5, 1.0}), 10.0};
    const auto u = depth_to_u16(d);
    CHECK(u[0] == 0);
    CHECK(u[1] == 32768);  // round(0.5 * 65535)
    CHECK(u[2] == 65535);
}
