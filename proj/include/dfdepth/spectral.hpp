#pragma once

#include <vector>

#include "dfdepth/tensor.hpp"

namespace dfdepth {

/// Complex 2-D spectrum of an H x W image, stored as separate real and
/// imaginary grids. Grid entry (row v, col u) holds the coefficient for
/// vertical frequency v and horizontal frequency u; width M and height N
/// match the source image.
struct FrequencyMap {
    int width = 0;   // M
    int height = 0;  // N
    std::vector<double> real_part;  // H x W row-major
    std::vector<double> imag_part;

    double re(int u, int v) const { return real_part[static_cast<std::size_t>(v) * width + u]; }
    double im(int u, int v) const { return imag_part[static_cast<std::size_t>(v) * width + u]; }
};

// Forward 2-D DFT, evaluated as separable 1-D passes.
FrequencyMap dft2(const Tensor& image);  // [H,W]

// Inverse with 1/(M*N) normalization; idft2(dft2(x)) == x to rounding.
Tensor idft2(const FrequencyMap& freq);  // [H,W]

// Two-channel real representation: DC-centered log-magnitude min-max
// normalized to [0,1], and DC-centered phase scaled to [-1,1]. A degenerate
// magnitude grid (max == min) normalizes to all zeros.
Tensor freq_representation(const FrequencyMap& freq);  // [2,H,W]

// Rec.601 luma weights.
Tensor luminance(const Tensor& rgb);  // [3,H,W] -> [H,W]

// Full frequency-branch preprocessing for an RGB image.
Tensor frequency_input(const Tensor& rgb);  // [3,H,W] -> [2,H,W]

}  // namespace dfdepth
