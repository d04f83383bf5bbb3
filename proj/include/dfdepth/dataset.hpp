#pragma once

#include <string>
#include <vector>

#include "dfdepth/synth.hpp"

namespace dfdepth {

// Loads image/depth pairs from <dir>/images/NNNN.png (8-bit RGB) and
// <dir>/depths/NNNN.png (16-bit grayscale millimeters), with depth_scale
// read from <dir>/meta. Depth values normalize as mm / (1000*depth_scale),
// clamped to [0,1]. Non-square inputs are cropped to image_size x image_size
// (centered unless crop offsets are >= 0). Unpaired or mismatched files are
// skipped with a warning on stderr; an empty result is an error.
std::vector<ImageSample> load_dataset(const std::string& dir, int image_size, int crop_offset_x = -1,
                                      int crop_offset_y = -1);

// Writes samples in the layout load_dataset expects.
void write_dataset(const std::string& dir, const std::vector<ImageSample>& samples);

}  // namespace dfdepth
