#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dfdepth/adam.hpp"
#include "dfdepth/ops.hpp"
#include "oracles.hpp"

using namespace dfdepth;

TEST_CASE("matmul identity and hand-evaluated product") {
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor prod = matmul(eye, a);
    for (std::size_t i = 0; i < 4; ++i) CHECK(prod.data()[i] == a.data()[i]);

    Tensor b = Tensor::from_data({2, 1}, {5, 6});
    Tensor c = matmul(a, b);
    CHECK(c.data()[0] == doctest::Approx(17.0));
    CHECK(c.data()[1] == doctest::Approx(39.0));

    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), std::invalid_argument);
    CHECK_THROWS_WITH_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                         doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("matmul matches triple-loop oracle on random case") {
    Rng rng(7);
    Tensor a = oracles::random_tensor({4, 3}, rng);
    Tensor b = oracles::random_tensor({3, 5}, rng);
    Tensor c = matmul(a, b);
    const auto ref = oracles::matmul({a.data().begin(), a.data().end()},
                                     {b.data().begin(), b.data().end()}, 4, 3, 5);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("conv2d identity kernel, block means, and precondition") {
    Tensor ones = Tensor::full({1, 3, 3}, 1.0);
    Tensor k1 = Tensor::full({1, 1, 1, 1}, 1.0);
    Tensor id = conv2d(ones, k1, 1, 0);
    CHECK(id.shape() == Shape{1, 3, 3});
    for (double v : id.data()) CHECK(v == 1.0);

    // 4x4 ramp, 2x2 averaging kernel, stride 2: the four block means.
    std::vector<double> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<std::size_t>(i)] = i + 1;
    Tensor x = Tensor::from_data({1, 4, 4}, ramp);
    Tensor avg = Tensor::full({1, 1, 2, 2}, 0.25);
    Tensor y = conv2d(x, avg, 2, 0);
    CHECK(y.shape() == Shape{1, 2, 2});
    CHECK(y.data()[0] == doctest::Approx(3.5));
    CHECK(y.data()[1] == doctest::Approx(5.5));
    CHECK(y.data()[2] == doctest::Approx(11.5));
    CHECK(y.data()[3] == doctest::Approx(13.5));

    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), 1, 0),
                    std::invalid_argument);
}

TEST_CASE("conv2d matches sliding-window oracle on random strided case") {
    Rng rng(11);
    Tensor x = oracles::random_tensor({2, 5, 6}, rng);
    Tensor k = oracles::random_tensor({3, 2, 3, 3}, rng);
    for (int stride : {1, 2}) {
        for (int pad : {0, 1}) {
            Tensor y = conv2d(x, k, stride, pad);
            const auto ref = oracles::conv2d({x.data().begin(), x.data().end()}, 2, 5, 6,
                                             {k.data().begin(), k.data().end()}, 3, 3, 3, stride, pad);
            REQUIRE(y.size() == ref.size());
            for (std::size_t i = 0; i < ref.size(); ++i)
                CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("transpose_conv2d scattering, tiling, and adjoint identity") {
    Tensor x = Tensor::from_data({1, 1, 1}, {2.5});
    Tensor k = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor y = transpose_conv2d(x, k, 2);
    CHECK(y.shape() == Shape{1, 2, 2});
    for (int i = 0; i < 4; ++i) CHECK(y.data()[static_cast<std::size_t>(i)] == doctest::Approx(2.5 * (i + 1)));

    Tensor x2 = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
    Tensor ones_k = Tensor::full({1, 1, 2, 2}, 1.0);
    Tensor tiled = transpose_conv2d(x2, ones_k, 2);
    CHECK(tiled.shape() == Shape{1, 4, 4});
    CHECK(tiled.at({0, 0, 0}) == 1.0);
    CHECK(tiled.at({0, 0, 1}) == 1.0);
    CHECK(tiled.at({0, 1, 1}) == 1.0);
    CHECK(tiled.at({0, 0, 2}) == 2.0);
    CHECK(tiled.at({0, 2, 0}) == 3.0);
    CHECK(tiled.at({0, 3, 3}) == 4.0);

    Rng rng(13);
    Tensor xr = oracles::random_tensor({2, 3, 3}, rng);
    Tensor kr = oracles::random_tensor({2, 3, 2, 2}, rng);
    Tensor yr = transpose_conv2d(xr, kr, 2);
    const auto ref = oracles::tconv2d({xr.data().begin(), xr.data().end()}, 2, 3, 3,
                                      {kr.data().begin(), kr.data().end()}, 3, 2, 2, 2);
    REQUIRE(yr.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(yr.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    // <conv(x,k), y> == <x, tconv(y,k)> on a random 5x5 instance.
    Tensor cx = oracles::random_tensor({2, 5, 5}, rng);
    Tensor ck = oracles::random_tensor({3, 2, 3, 3}, rng);
    for (int stride : {1, 2}) {
        Tensor cy = conv2d(cx, ck, stride, 0);
        Tensor probe = oracles::random_tensor(cy.shape(), rng);
        Tensor back = transpose_conv2d(probe, ck, stride);
        REQUIRE(back.shape() == cx.shape());
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < cy.size(); ++i) lhs += cy.data()[i] * probe.data()[i];
        for (std::size_t i = 0; i < cx.size(); ++i) rhs += cx.data()[i] * back.data()[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("relu forward cases and finite-difference gradient") {
    Tensor x = Tensor::from_data({3}, {-1, 0, 2});
    Tensor y = relu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == 0.0);
    CHECK(y.data()[2] == 2.0);

    Tensor pos = Tensor::from_data({3}, {0.5, 1.0, 7.0});
    Tensor same = relu(pos);
    for (std::size_t i = 0; i < 3; ++i) CHECK(same.data()[i] == pos.data()[i]);

    Tensor g = Tensor::from_data({2}, {-1, 2}, true);
    Tensor loss = sum(relu(g));
    backward(loss);
    CHECK(g.grad()[0] == 0.0);
    CHECK(g.grad()[1] == 1.0);
    const double err = oracles::max_grad_error([&] { return sum(relu(g)).item(); }, {g});
    CHECK(err < 1e-6);
}

TEST_CASE("batch_norm zero-variance, normalization, and direct evaluation") {
    Tensor constant = Tensor::full({2, 1, 2, 2}, 3.0);
    Tensor gamma = Tensor::full({1}, 1.0);
    Tensor beta = Tensor::zeros({1});
    Tensor out = batch_norm_train(constant, gamma, beta, 1e-5);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.0));

    Rng rng(3);
    Tensor x = oracles::random_tensor({2, 3, 4, 4}, rng);
    Tensor g3 = Tensor::full({3}, 1.0);
    Tensor b3 = Tensor::zeros({3});
    const double eps = 1e-5;
    Tensor norm = batch_norm_train(x, g3, b3, eps);
    for (int c = 0; c < 3; ++c) {
        double mu = 0.0, var = 0.0;
        int n = 0;
        for (int b = 0; b < 2; ++b)
            for (int i = 0; i < 16; ++i) {
                mu += norm.at({b, c, i / 4, i % 4});
                ++n;
            }
        mu /= n;
        for (int b = 0; b < 2; ++b)
            for (int i = 0; i < 16; ++i) {
                const double d = norm.at({b, c, i / 4, i % 4}) - mu;
                var += d * d;
            }
        var /= n;
        CHECK(std::abs(mu) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks variance slightly
    }

    // x=[1,3], gamma=2, beta=1, eps=0 -> [-1,3]
    Tensor pair = Tensor::from_data({1, 1, 1, 2}, {1, 3});
    Tensor g2 = Tensor::full({1}, 2.0);
    Tensor b1 = Tensor::full({1}, 1.0);
    Tensor direct = batch_norm_train(pair, g2, b1, 0.0);
    CHECK(direct.data()[0] == doctest::Approx(-1.0));
    CHECK(direct.data()[1] == doctest::Approx(3.0));
}

TEST_CASE("batch_norm gradients match finite differences") {
    Rng rng(5);
    Tensor x = oracles::random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
    Tensor gamma = oracles::random_tensor({2}, rng, 0.5, 1.5, true);
    Tensor beta = oracles::random_tensor({2}, rng, -0.5, 0.5, true);
    Tensor w = oracles::random_tensor({2, 2, 3, 3}, rng);

    auto eval = [&] { return sum(mul(batch_norm_train(x, gamma, beta, 1e-5), w)).item(); };
    Tensor loss = sum(mul(batch_norm_train(x, gamma, beta, 1e-5), w));
    backward(loss);
    CHECK(oracles::max_grad_error(eval, {x, gamma, beta}) < 1e-6);
}

TEST_CASE("softmax symmetry, stability, and direct evaluation") {
    Tensor z = Tensor::zeros({3});
    Tensor s = softmax(z, 0);
    for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

    Tensor big = Tensor::from_data({2}, {1000, 0});
    Tensor sb = softmax(big, 0);
    CHECK(sb.data()[0] == doctest::Approx(1.0));
    CHECK(sb.data()[1] == doctest::Approx(0.0));

    Tensor logs = Tensor::from_data({3}, {std::log(1.0), std::log(2.0), std::log(3.0)});
    Tensor sl = softmax(logs, 0);
    CHECK(sl.data()[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(sl.data()[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(sl.data()[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));

    Rng rng(17);
    Tensor m = oracles::random_tensor({4, 6}, rng, -3, 3);
    Tensor sm = softmax(m, 1);
    for (int i = 0; i < 4; ++i) {
        double row = 0.0;
        for (int j = 0; j < 6; ++j) {
            CHECK(sm.at({i, j}) >= 0.0);
            row += sm.at({i, j});
        }
        CHECK(std::abs(row - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(softmax(m, 2), std::invalid_argument);
}

TEST_CASE("backward on linear and quadratic graphs") {
    Tensor x = Tensor::from_data({3}, {4, 5, 6}, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);

    Tensor q = Tensor::from_data({2}, {1, 2}, true);
    backward(sum(mul(q, q)));
    CHECK(q.grad()[0] == doctest::Approx(2.0));
    CHECK(q.grad()[1] == doctest::Approx(4.0));

    CHECK_THROWS_AS(backward(Tensor::from_data({2}, {1, 2}, true)), std::invalid_argument);
}

TEST_CASE("off-path leaves keep zero gradient") {
    Tensor used = Tensor::from_data({2}, {1, 2}, true);
    Tensor unused = Tensor::from_data({2}, {3, 4}, true);
    backward(sum(used));
    CHECK(unused.grad()[0] == 0.0);
    CHECK(unused.grad()[1] == 0.0);
}

TEST_CASE("composite graph gradient matches finite differences") {
    Rng rng(23);
    Tensor a = oracles::random_tensor({3, 4}, rng, -1, 1, true);
    Tensor b = oracles::random_tensor({4, 2}, rng, -1, 1, true);
    Tensor c = oracles::random_tensor({3, 2}, rng, -1, 1, true);

    auto eval = [&] {
        Tensor t = matmul(a, b);
        t = add(t, c);
        t = sigmoid(t);
        t = mul(t, t);
        Tensor sm = softmax(matmul(transpose2d(t), t), 1);
        return mean(sm).item() + mean(t).item();
    };
    Tensor t = matmul(a, b);
    t = add(t, c);
    t = sigmoid(t);
    t = mul(t, t);
    Tensor loss = add(mean(softmax(matmul(transpose2d(t), t), 1)), mean(t));
    backward(loss);
    CHECK(oracles::max_grad_error(eval, {a, b, c}) < 1e-6);
}

TEST_CASE("elementwise, shaping, and broadcast ops match finite differences") {
    Rng rng(29);
    Tensor a = oracles::random_tensor({2, 3}, rng, 0.5, 2.0, true);
    Tensor b = oracles::random_tensor({2, 3}, rng, 0.5, 2.0, true);
    Tensor bias = oracles::random_tensor({3}, rng, -1, 1, true);
    Tensor cbias = oracles::random_tensor({2}, rng, -1, 1, true);
    Tensor x4 = oracles::random_tensor({1, 2, 2, 2}, rng, -1, 1, true);

    auto eval = [&] {
        Tensor t = divide(mul(add(a, b), sub(a, b)), add_scalar(b, 3.0));
        t = add_row_broadcast(t, bias);
        t = add(scale(t, 0.7), reshape(reshape(t, {6}), {2, 3}));
        Tensor u = add_channel_bias(x4, cbias);
        Tensor st = stack0({t, scale(t, -1.0)});
        Tensor sel = select0(st, 0);
        Tensor cat = concat_cols({sel, slice_cols(sel, 1, 2)});
        Tensor gathered = gather(cat, {0, 4, 2, 9}, {2, 2});
        return add(add(mean(u), mean(cat)), sum(gathered)).item();
    };
    {
        Tensor t = divide(mul(add(a, b), sub(a, b)), add_scalar(b, 3.0));
        t = add_row_broadcast(t, bias);
        t = add(scale(t, 0.7), reshape(reshape(t, {6}), {2, 3}));
        Tensor u = add_channel_bias(x4, cbias);
        Tensor st = stack0({t, scale(t, -1.0)});
        Tensor sel = select0(st, 0);
        Tensor cat = concat_cols({sel, slice_cols(sel, 1, 2)});
        Tensor gathered = gather(cat, {0, 4, 2, 9}, {2, 2});
        backward(add(add(mean(u), mean(cat)), sum(gathered)));
    }
    CHECK(oracles::max_grad_error(eval, {a, b, bias, cbias, x4}) < 1e-6);
}

TEST_CASE("conv and transpose conv gradients match finite differences") {
    Rng rng(31);
    Tensor x = oracles::random_tensor({2, 4, 4}, rng, -1, 1, true);
    Tensor k = oracles::random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
    Tensor kt = oracles::random_tensor({2, 3, 2, 2}, rng, -1, 1, true);

    auto eval = [&] {
        Tensor y = conv2d(x, k, 2, 1);
        Tensor z = transpose_conv2d(y, kt, 2);
        return mean(mul(z, z)).item();
    };
    Tensor y = conv2d(x, k, 2, 1);
    Tensor z = transpose_conv2d(y, kt, 2);
    backward(mean(mul(z, z)));
    CHECK(oracles::max_grad_error(eval, {x, k, kt}) < 1e-6);
}

TEST_CASE("layer_norm normalizes rows and its gradient checks out") {
    Rng rng(37);
    Tensor x = oracles::random_tensor({3, 8}, rng, -2, 2, true);
    Tensor gamma = oracles::random_tensor({8}, rng, 0.5, 1.5, true);
    Tensor beta = oracles::random_tensor({8}, rng, -0.5, 0.5, true);

    Tensor unit = layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}), 1e-12);
    for (int i = 0; i < 3; ++i) {
        double mu = 0.0, var = 0.0;
        for (int j = 0; j < 8; ++j) mu += unit.at({i, j});
        mu /= 8;
        for (int j = 0; j < 8; ++j) var += (unit.at({i, j}) - mu) * (unit.at({i, j}) - mu);
        var /= 8;
        CHECK(std::abs(mu) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }

    auto eval = [&] {
        Tensor w = Tensor::from_data({3, 8}, std::vector<double>(24, 0.25));
        return sum(mul(layer_norm(x, gamma, beta, 1e-5), w)).item();
    };
    Tensor w = Tensor::from_data({3, 8}, std::vector<double>(24, 0.25));
    backward(sum(mul(layer_norm(x, gamma, beta, 1e-5), w)));
    CHECK(oracles::max_grad_error(eval, {x, gamma, beta}) < 1e-6);
}

TEST_CASE("ops never mutate their inputs") {
    Rng rng(41);
    Tensor a = oracles::random_tensor({2, 2}, rng, -1, 1, true);
    Tensor b = oracles::random_tensor({2, 2}, rng, 0.5, 1.5, true);
    const std::vector<double> a0(a.data().begin(), a.data().end());
    const std::vector<double> b0(b.data().begin(), b.data().end());
    Tensor r = matmul(relu(a), softmax(divide(a, b), 1));
    backward(sum(r));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.data()[i] == a0[i]);
        CHECK(b.data()[i] == b0[i]);
    }
}

TEST_CASE("non-finite op outputs are a hard error") {
    Tensor num = Tensor::full({2}, 1.0);
    Tensor den = Tensor::zeros({2});
    CHECK_THROWS_AS(divide(num, den), std::runtime_error);
}

TEST_CASE("computation record replays bit-identically and visits nodes once") {
    Rng rng(43);
    Tensor a = oracles::random_tensor({3, 3}, rng, -1, 1, true);
    Tensor b = oracles::random_tensor({3, 3}, rng, -1, 1, true);
    Tensor shared = mul(a, b);
    Tensor out = add(matmul(shared, shared), softmax(shared, 1));

    ComputationRecord record = ComputationRecord::from(out);
    std::vector<std::uint64_t> ids;
    for (const auto& e : record.entries()) ids.push_back(e.output_id);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());  // each node exactly once

    // Inputs are always recorded before their consumers.
    for (const auto& e : record.entries()) {
        for (const auto in : e.input_ids) {
            bool seen = false;
            for (const auto& prior : record.entries()) {
                if (prior.output_id == e.output_id) break;
                if (prior.output_id == in) {
                    seen = true;
                    break;
                }
            }
            CHECK(seen);
        }
    }

    const std::vector<double> before(out.data().begin(), out.data().end());
    record.replay();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(out.data()[i] == before[i]);
}

TEST_CASE("adam zero-gradient fixed point and closed-form first step") {
    std::vector<std::pair<std::string, Tensor>> params;
    params.emplace_back("w", Tensor::from_data({3}, {1.0, -2.0, 0.5}, true));
    AdamState state;
    state.init_like(params);
    const std::vector<double> before(params[0].second.data().begin(), params[0].second.data().end());
    adam_step(params, state, AdamConfig{}, 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(params[0].second.data()[i] == before[i]);

    // Single scalar, g=1, t=1: bias-corrected step is lr / (1 + eps).
    std::vector<std::pair<std::string, Tensor>> single;
    single.emplace_back("s", Tensor::from_data({1}, {0.0}, true));
    Tensor leaf = single[0].second;
    backward(sum(leaf));  // gradient 1
    AdamState st2;
    st2.init_like(single);
    const AdamConfig cfg{1e-4, 0.9, 0.999, 1e-8};
    adam_step(single, st2, cfg, 1);
    const double expected = -cfg.lr * 1.0 / (1.0 + cfg.eps);
    CHECK(single[0].second.data()[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(single[0].second.data()[0] + cfg.lr) < 1e-10);

    CHECK_THROWS_AS(adam_step(single, state, cfg, 2), std::invalid_argument);
    CHECK_THROWS_AS(adam_step(single, st2, cfg, 0), std::invalid_argument);
}

TEST_CASE("adam runs are deterministic") {
    auto run = [] {
        Rng rng(99);
        std::vector<std::pair<std::string, Tensor>> params;
        params.emplace_back("w", oracles::random_tensor({4, 4}, rng, -1, 1, true));
        Tensor target = oracles::random_tensor({4, 4}, rng);
        AdamState state;
        state.init_like(params);
        for (int t = 1; t <= 25; ++t) {
            params[0].second.zero_grad();
            Tensor diff = sub(params[0].second, target);
            backward(mean(mul(diff, diff)));
            adam_step(params, state, AdamConfig{1e-2, 0.9, 0.999, 1e-8}, t);
        }
        return std::vector<double>(params[0].second.data().begin(), params[0].second.data().end());
    };
    const auto r1 = run();
    const auto r2 = run();
    CHECK(r1 == r2);
}

TEST_CASE("f32 precision rounds op outputs through single precision") {
    set_precision(Precision::f32);
    Tensor a = Tensor::from_data({2}, {1.0 / 3.0, 2.0 / 7.0});
    Tensor b = Tensor::from_data({2}, {1.0 / 9.0, 3.0 / 11.0});
    Tensor c = mul(a, b);
    for (double v : c.data()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
    set_precision(Precision::f64);
    Tensor d = mul(Tensor::from_data({1}, {1.0 / 3.0}), Tensor::from_data({1}, {1.0 / 7.0}));
    CHECK(d.data()[0] == (1.0 / 3.0) * (1.0 / 7.0));
}
