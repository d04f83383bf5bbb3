#include "dfdepth/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace dfdepth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Twiddle {
    std::vector<double> cos_t, sin_t;  // e^{-2*pi*i*k/n} for k in [0, n)
    explicit Twiddle(int n) : cos_t(static_cast<std::size_t>(n)), sin_t(static_cast<std::size_t>(n)) {
        for (int k = 0; k < n; ++k) {
            const double a = kTwoPi * k / n;
            cos_t[static_cast<std::size_t>(k)] = std::cos(a);
            sin_t[static_cast<std::size_t>(k)] = -std::sin(a);
        }
    }
};

}  // namespace

FrequencyMap dft2(const Tensor& image) {
    if (image.ndim() != 2) {
        throw std::invalid_argument("dft2: expected [H,W] image, got " + shape_str(image.shape()));
    }
    const int N = image.dim(0);  // height, y/v axis
    const int M = image.dim(1);  // width,  x/u axis
    const auto px = image.data();

    // Row pass: G(u, y) = sum_x f(x, y) e^{-2*pi*i*u*x/M}
    std::vector<double> gr(static_cast<std::size_t>(N) * M, 0.0);
    std::vector<double> gi(static_cast<std::size_t>(N) * M, 0.0);
    const Twiddle tw_m(M);
    for (int y = 0; y < N; ++y) {
        for (int u = 0; u < M; ++u) {
            double sr = 0.0, si = 0.0;
            for (int x = 0; x < M; ++x) {
                const int k = static_cast<int>((static_cast<long long>(u) * x) % M);
                const double f = px[static_cast<std::size_t>(y) * M + x];
                sr += f * tw_m.cos_t[static_cast<std::size_t>(k)];
                si += f * tw_m.sin_t[static_cast<std::size_t>(k)];
            }
            gr[static_cast<std::size_t>(y) * M + u] = sr;
            gi[static_cast<std::size_t>(y) * M + u] = si;
        }
    }

    // Column pass: F(u, v) = sum_y G(u, y) e^{-2*pi*i*v*y/N}
    FrequencyMap out;
    out.width = M;
    out.height = N;
    out.real_part.assign(static_cast<std::size_t>(N) * M, 0.0);
    out.imag_part.assign(static_cast<std::size_t>(N) * M, 0.0);
    const Twiddle tw_n(N);
    for (int u = 0; u < M; ++u) {
        for (int v = 0; v < N; ++v) {
            double sr = 0.0, si = 0.0;
            for (int y = 0; y < N; ++y) {
                const int k = static_cast<int>((static_cast<long long>(v) * y) % N);
                const double c = tw_n.cos_t[static_cast<std::size_t>(k)];
                const double s = tw_n.sin_t[static_cast<std::size_t>(k)];
                const double ar = gr[static_cast<std::size_t>(y) * M + u];
                const double ai = gi[static_cast<std::size_t>(y) * M + u];
                sr += ar * c - ai * s;
                si += ar * s + ai * c;
            }
            out.real_part[static_cast<std::size_t>(v) * M + u] = sr;
            out.imag_part[static_cast<std::size_t>(v) * M + u] = si;
        }
    }
    return out;
}

Tensor idft2(const FrequencyMap& freq) {
    const int M = freq.width, N = freq.height;
    if (M <= 0 || N <= 0 || freq.real_part.size() != static_cast<std::size_t>(M) * N ||
        freq.imag_part.size() != static_cast<std::size_t>(M) * N) {
        throw std::invalid_argument("idft2: inconsistent frequency map dimensions");
    }

    // Column pass first (conjugate twiddles), then row pass.
    std::vector<double> gr(static_cast<std::size_t>(N) * M, 0.0);
    std::vector<double> gi(static_cast<std::size_t>(N) * M, 0.0);
    const Twiddle tw_n(N);
    for (int u = 0; u < M; ++u) {
        for (int y = 0; y < N; ++y) {
            double sr = 0.0, si = 0.0;
            for (int v = 0; v < N; ++v) {
                const int k = static_cast<int>((static_cast<long long>(v) * y) % N);
                const double c = tw_n.cos_t[static_cast<std::size_t>(k)];
                const double s = -tw_n.sin_t[static_cast<std::size_t>(k)];  // e^{+i...}
                const double ar = freq.real_part[static_cast<std::size_t>(v) * M + u];
                const double ai = freq.imag_part[static_cast<std::size_t>(v) * M + u];
                sr += ar * c - ai * s;
                si += ar * s + ai * c;
            }
            gr[static_cast<std::size_t>(y) * M + u] = sr;
            gi[static_cast<std::size_t>(y) * M + u] = si;
        }
    }

    std::vector<double> out(static_cast<std::size_t>(N) * M, 0.0);
    const Twiddle tw_m(M);
    const double norm = 1.0 / (static_cast<double>(M) * N);
    for (int y = 0; y < N; ++y) {
        for (int x = 0; x < M; ++x) {
            double sr = 0.0;
            for (int u = 0; u < M; ++u) {
                const int k = static_cast<int>((static_cast<long long>(u) * x) % M);
                const double c = tw_m.cos_t[static_cast<std::size_t>(k)];
                const double s = -tw_m.sin_t[static_cast<std::size_t>(k)];
                sr += gr[static_cast<std::size_t>(y) * M + u] * c - gi[static_cast<std::size_t>(y) * M + u] * s;
            }
            out[static_cast<std::size_t>(y) * M + x] = sr * norm;
        }
    }
    return Tensor::from_data({N, M}, std::move(out));
}

Tensor freq_representation(const FrequencyMap& freq) {
    const int M = freq.width, N = freq.height;
    if (M <= 0 || N <= 0) throw std::invalid_argument("freq_representation: empty frequency map");
    const std::size_t hw = static_cast<std::size_t>(N) * M;

    // DC-centering quadrant swap: source (v,u) lands at
    // ((v + N/2) mod N, (u + M/2) mod M).
    std::vector<double> mag(hw), phase(hw);
    for (int v = 0; v < N; ++v) {
        for (int u = 0; u < M; ++u) {
            const int vs = (v + N / 2) % N;
            const int us = (u + M / 2) % M;
            const double re = freq.re(u, v);
            const double im = freq.im(u, v);
            mag[static_cast<std::size_t>(vs) * M + us] = std::log1p(std::hypot(re, im));
            phase[static_cast<std::size_t>(vs) * M + us] = std::atan2(im, re) / 3.14159265358979323846;
        }
    }
    double lo = mag[0], hi = mag[0];
    for (double m : mag) {
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    std::vector<double> out(2 * hw);
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (std::size_t i = 0; i < hw; ++i) out[i] = (mag[i] - lo) * inv;
    } else {
        for (std::size_t i = 0; i < hw; ++i) out[i] = 0.0;
    }
    for (std::size_t i = 0; i < hw; ++i) out[hw + i] = phase[i];
    return Tensor::from_data({2, N, M}, std::move(out));
}

Tensor luminance(const Tensor& rgb) {
    if (rgb.ndim() != 3 || rgb.dim(0) != 3) {
        throw std::invalid_argument("luminance: expected [3,H,W] image, got " + shape_str(rgb.shape()));
    }
    const int H = rgb.dim(1), W = rgb.dim(2);
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    const auto px = rgb.data();
    std::vector<double> out(hw);
    for (std::size_t i = 0; i < hw; ++i) {
        out[i] = 0.299 * px[i] + 0.587 * px[hw + i] + 0.114 * px[2 * hw + i];
    }
    return Tensor::from_data({H, W}, std::move(out));
}

Tensor frequency_input(const Tensor& rgb) {
    return freq_representation(dft2(luminance(rgb)));
}

}  // namespace dfdepth
