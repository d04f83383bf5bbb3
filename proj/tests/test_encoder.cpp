#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dfdepth/encoder.hpp"
#include "oracles.hpp"

using namespace dfdepth;

TEST_CASE("zero transform path reduces the block to its shortcut") {
    Rng rng(1);
    ResidualBlockParams block(2, 4, rng);
    block.conv1.set_data(std::vector<double>(block.conv1.size(), 0.0));
    block.conv2.set_data(std::vector<double>(block.conv2.size(), 0.0));

    Tensor x = oracles::random_tensor({2, 6, 6}, rng);
    Tensor out = residual_down_block(x, block, true);
    Tensor expected = conv2d(x, block.shortcut, 2, 0);
    REQUIRE(out.shape() == expected.shape());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == doctest::Approx(expected.data()[i]));
}

TEST_CASE("block matches a straight-line composition of the primitives") {
    Rng rng(2);
    ResidualBlockParams block(3, 4, rng);
    Tensor x = oracles::random_tensor({2, 3, 8, 8}, rng);

    Tensor out = residual_down_block(x, block, true);

    Tensor t = batch_norm_train(x, block.bn1.gamma, block.bn1.beta, block.bn1.eps);
    t = relu(t);
    t = conv2d(t, block.conv1, 2, 1);
    t = batch_norm_train(t, block.bn2.gamma, block.bn2.beta, block.bn2.eps);
    t = relu(t);
    t = conv2d(t, block.conv2, 1, 1);
    Tensor expected = add(conv2d(x, block.shortcut, 2, 0), t);

    REQUIRE(out.shape() == expected.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
}

TEST_CASE("odd spatial dims are rejected") {
    Rng rng(3);
    ResidualBlockParams block(1, 2, rng);
    CHECK_THROWS_AS(residual_down_block(Tensor::zeros({1, 3, 3}), block, true), std::invalid_argument);
}

TEST_CASE("encode produces the configured feature geometry for both branches") {
    Rng rng(4);
    EncoderParams spatial(3, 64, 2, FeatureTag::spatial, rng);
    EncoderParams freq(2, 64, 2, FeatureTag::frequency, rng);

    FeatureMatrix f = encode(oracles::random_tensor({3, 64, 64}, rng), spatial);
    CHECK(f.values.shape() == Shape{64, 16, 16});
    CHECK(f.tag == FeatureTag::spatial);

    FeatureMatrix g = encode(oracles::random_tensor({2, 64, 64}, rng), freq);
    CHECK(g.values.shape() == Shape{64, 16, 16});
    CHECK(g.tag == FeatureTag::frequency);

    CHECK_THROWS_WITH_AS(encode(Tensor::zeros({3, 50, 50}), spatial), doctest::Contains("16"),
                         std::invalid_argument);
    CHECK_THROWS_AS(encode(Tensor::zeros({2, 64, 64}), spatial), std::invalid_argument);
}

TEST_CASE("encoder forward is deterministic for fixed parameters") {
    Rng rng(5);
    EncoderParams enc(3, 16, 2, FeatureTag::spatial, rng);
    Tensor x = oracles::random_tensor({2, 3, 32, 32}, rng);
    Tensor a = encode_batch(x, enc, true);
    Tensor b = encode_batch(x, enc, true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("gradient reaches every encoder parameter") {
    Rng rng(6);
    EncoderParams enc(3, 8, 2, FeatureTag::spatial, rng);
    Tensor x = oracles::random_tensor({2, 3, 16, 16}, rng);
    Tensor w = oracles::random_tensor({2, 8, 4, 4}, rng);
    backward(sum(mul(encode_batch(x, enc, true), w)));

    auto check_nonzero = [](const Tensor& p, const char* name) {
        bool any = false;
        for (double g : p.grad()) any = any || g != 0.0;
        INFO(name);
        CHECK(any);
    };
    for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
        auto& b = enc.blocks[i];
        check_nonzero(b.conv1, "conv1");
        check_nonzero(b.conv2, "conv2");
        check_nonzero(b.shortcut, "shortcut");
        check_nonzero(b.bn1.gamma, "bn1.gamma");
        check_nonzero(b.bn1.beta, "bn1.beta");
        check_nonzero(b.bn2.gamma, "bn2.gamma");
        check_nonzero(b.bn2.beta, "bn2.beta");
    }
}

TEST_CASE("eval mode applies running statistics") {
    Rng rng(7);
    EncoderParams enc(1, 4, 1, FeatureTag::spatial, rng);
    Tensor x = oracles::random_tensor({4, 1, 8, 8}, rng);
    // Train once so the buffers move off their init.
    encode_batch(x, enc, true);
    const auto mean_after = enc.blocks[0].bn1.running_mean;
    Tensor e1 = encode_batch(x, enc, false);
    // Eval must not modify the buffers.
    CHECK(enc.blocks[0].bn1.running_mean == mean_after);
    Tensor e2 = encode_batch(x, enc, false);
    for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1.data()[i] == e2.data()[i]);
}
