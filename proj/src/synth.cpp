#include "dfdepth/synth.hpp"

#include <algorithm>
#include <stdexcept>

#include "dfdepth/rng.hpp"

namespace dfdepth {

ImageSample synth_scene(std::uint64_t seed, int size, double depth_scale) {
    if (size < 2) throw std::invalid_argument("synth_scene: size must be >= 2");
    if (depth_scale <= 0.0) throw std::invalid_argument("synth_scene: depth_scale must be positive");
    const int s = size;
    const std::size_t hw = static_cast<std::size_t>(s) * s;
    Rng rng(seed);

    // Ground plane: far at the top, near at the bottom.
    std::vector<double> depth(hw);
    for (int y = 0; y < s; ++y) {
        const double t = static_cast<double>(y) / (s - 1);
        const double d = 0.95 - 0.60 * t;
        for (int x = 0; x < s; ++x) depth[static_cast<std::size_t>(y) * s + x] = d;
    }

    double base[3];
    for (double& c : base) c = rng.uniform(0.25, 0.85);
    std::vector<double> albedo(3 * hw);
    for (std::size_t i = 0; i < hw; ++i) {
        albedo[i] = base[0];
        albedo[hw + i] = base[1];
        albedo[2 * hw + i] = base[2];
    }

    const int n_rects = rng.uniform_int(3, 6);
    for (int r = 0; r < n_rects; ++r) {
        const int rw = rng.uniform_int(std::max(2, s / 6), std::max(3, s / 2));
        const int rh = rng.uniform_int(std::max(2, s / 6), std::max(3, s / 2));
        const int x0 = rng.uniform_int(0, s - rw);
        const int y0 = rng.uniform_int(0, s - rh);
        const double rd = rng.uniform(0.04, 0.85);
        double color[3];
        for (double& c : color) c = rng.uniform(0.1, 1.0);
        for (int y = y0; y < y0 + rh; ++y) {
            for (int x = x0; x < x0 + rw; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * s + x;
                if (rd < depth[i]) {  // nearer surface occludes
                    depth[i] = rd;
                    albedo[i] = color[0];
                    albedo[hw + i] = color[1];
                    albedo[2 * hw + i] = color[2];
                }
            }
        }
    }

    std::vector<double> rgb(3 * hw);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < hw; ++i) {
            const double shade = 1.0 - 0.55 * depth[i];
            rgb[static_cast<std::size_t>(c) * hw + i] =
                std::clamp(albedo[static_cast<std::size_t>(c) * hw + i] * shade, 0.0, 1.0);
        }
    }

    ImageSample sample;
    sample.image = Tensor::from_data({3, s, s}, std::move(rgb));
    sample.depth = Tensor::from_data({1, s, s}, std::move(depth));
    sample.depth_scale = depth_scale;
    sample.id = "synth-" + std::to_string(seed);
    return sample;
}

}  // namespace dfdepth
