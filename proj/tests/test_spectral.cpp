#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "dfdepth/spectral.hpp"
#include "oracles.hpp"

using namespace dfdepth;

TEST_CASE("constant image has only the DC coefficient") {
    FrequencyMap f = dft2(Tensor::full({2, 2}, 1.0));
    CHECK(f.re(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(f.im(0, 0)) < 1e-12);
    for (int v = 0; v < 2; ++v)
        for (int u = 0; u < 2; ++u) {
            if (u == 0 && v == 0) continue;
            CHECK(std::abs(f.re(u, v)) < 1e-12);
            CHECK(std::abs(f.im(u, v)) < 1e-12);
        }
}

TEST_CASE("impulse at the origin transforms to all ones") {
    std::vector<double> img(12, 0.0);
    img[0] = 1.0;
    FrequencyMap f = dft2(Tensor::from_data({3, 4}, img));
    for (int v = 0; v < 3; ++v)
        for (int u = 0; u < 4; ++u) {
            CHECK(f.re(u, v) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(f.im(u, v)) < 1e-12);
        }
}

TEST_CASE("dft2 matches the brute-force double-sum oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const int h = rng.uniform_int(2, 8);
        const int w = rng.uniform_int(2, 8);
        Tensor img = oracles::random_tensor({h, w}, rng, 0.0, 1.0);
        FrequencyMap f = dft2(img);
        std::vector<double> re, im;
        oracles::dft2({img.data().begin(), img.data().end()}, h, w, re, im);
        for (std::size_t i = 0; i < re.size(); ++i) {
            CHECK(std::abs(f.real_part[i] - re[i]) < 1e-9);
            CHECK(std::abs(f.imag_part[i] - im[i]) < 1e-9);
        }
    }
}

TEST_CASE("F(0,0) equals the pixel sum and conjugate symmetry holds") {
    Rng rng(103);
    Tensor img = oracles::random_tensor({6, 5}, rng, 0.0, 1.0);
    FrequencyMap f = dft2(img);
    double total = 0.0;
    for (double v : img.data()) total += v;
    CHECK(f.re(0, 0) == doctest::Approx(total).epsilon(1e-12));
    CHECK(std::abs(f.im(0, 0)) < 1e-9);

    const int M = 5, N = 6;
    for (int v = 0; v < N; ++v)
        for (int u = 0; u < M; ++u) {
            const int uc = (M - u) % M;
            const int vc = (N - v) % N;
            CHECK(f.re(u, v) == doctest::Approx(f.re(uc, vc)).epsilon(1e-9));
            CHECK(f.im(u, v) == doctest::Approx(-f.im(uc, vc)).epsilon(1e-9));
        }
}

TEST_CASE("idft2 round trip, zero map, and DC-only map") {
    Rng rng(107);
    Tensor img = oracles::random_tensor({3, 5}, rng, 0.0, 1.0);
    Tensor back = idft2(dft2(img));
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back.data()[i] - img.data()[i]) < 1e-9);

    FrequencyMap zero;
    zero.width = 4;
    zero.height = 3;
    zero.real_part.assign(12, 0.0);
    zero.imag_part.assign(12, 0.0);
    Tensor z = idft2(zero);
    for (double v : z.data()) CHECK(v == doctest::Approx(0.0));

    FrequencyMap dc = zero;
    dc.real_part[0] = 12.0 * 0.37;  // M*N*c
    Tensor c = idft2(dc);
    for (double v : c.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("Parseval identity holds") {
    Rng rng(109);
    Tensor img = oracles::random_tensor({7, 4}, rng, 0.0, 1.0);
    FrequencyMap f = dft2(img);
    double spatial = 0.0, freq = 0.0;
    for (double v : img.data()) spatial += v * v;
    for (std::size_t i = 0; i < f.real_part.size(); ++i) {
        freq += f.real_part[i] * f.real_part[i] + f.imag_part[i] * f.imag_part[i];
    }
    CHECK(std::abs(spatial - freq / (7.0 * 4.0)) < 1e-9);
}

TEST_CASE("dft2 is linear") {
    Rng rng(113);
    Tensor x = oracles::random_tensor({4, 4}, rng, 0.0, 1.0);
    Tensor y = oracles::random_tensor({4, 4}, rng, 0.0, 1.0);
    const double a = 1.7, b = -0.4;
    std::vector<double> mix(16);
    for (std::size_t i = 0; i < 16; ++i) mix[i] = a * x.data()[i] + b * y.data()[i];
    FrequencyMap fm = dft2(Tensor::from_data({4, 4}, mix));
    FrequencyMap fx = dft2(x);
    FrequencyMap fy = dft2(y);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(std::abs(fm.real_part[i] - (a * fx.real_part[i] + b * fy.real_part[i])) < 1e-9);
        CHECK(std::abs(fm.imag_part[i] - (a * fx.imag_part[i] + b * fy.imag_part[i])) < 1e-9);
    }
}

TEST_CASE("freq_representation centers DC and normalizes") {
    // Constant image: single 1.0 at the center of channel 0.
    Tensor rep = freq_representation(dft2(Tensor::full({4, 6}, 0.8)));
    CHECK(rep.shape() == Shape{2, 4, 6});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) {
            const double expected = (y == 2 && x == 3) ? 1.0 : 0.0;
            CHECK(rep.at({0, y, x}) == doctest::Approx(expected));
        }

    // Zero image: both channels all zeros.
    Tensor zrep = freq_representation(dft2(Tensor::zeros({4, 4})));
    for (double v : zrep.data()) CHECK(v == 0.0);

    // Channel bounds on a random image.
    Rng rng(127);
    Tensor rrep = freq_representation(dft2(oracles::random_tensor({8, 8}, rng, 0.0, 1.0)));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            CHECK(rrep.at({0, y, x}) >= 0.0);
            CHECK(rrep.at({0, y, x}) <= 1.0);
            CHECK(rrep.at({1, y, x}) >= -1.0);
            CHECK(rrep.at({1, y, x}) <= 1.0);
        }
}

TEST_CASE("luminance applies the Rec.601 weights") {
    std::vector<double> px(3 * 4, 0.0);
    px[0] = 1.0;       // R at pixel 0
    px[4 + 1] = 1.0;   // G at pixel 1
    px[8 + 2] = 1.0;   // B at pixel 2
    Tensor lum = luminance(Tensor::from_data({3, 2, 2}, px));
    CHECK(lum.data()[0] == doctest::Approx(0.299));
    CHECK(lum.data()[1] == doctest::Approx(0.587));
    CHECK(lum.data()[2] == doctest::Approx(0.114));
    CHECK(lum.data()[3] == doctest::Approx(0.0));

    Tensor fin = frequency_input(Tensor::full({3, 8, 8}, 0.5));
    CHECK(fin.shape() == Shape{2, 8, 8});
}
