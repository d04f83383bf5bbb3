#pragma once

#include <cstdint>
#include <string>

#include "dfdepth/tensor.hpp"

namespace dfdepth {

/// One training pair: RGB image and normalized ground-truth depth.
struct ImageSample {
    Tensor image;  // [3,S,S] in [0,1]
    Tensor depth;  // [1,S,S] in [0,1]
    double depth_scale = 10.0;
    std::string id;
};

// Deterministic synthetic scene: a ground plane with a vertical depth
// gradient plus 3-6 axis-aligned rectangles at random depths, RGB shaded by
// depth. Same (seed, size) reproduces the sample bitwise.
ImageSample synth_scene(std::uint64_t seed, int size, double depth_scale = 10.0);

}  // namespace dfdepth
