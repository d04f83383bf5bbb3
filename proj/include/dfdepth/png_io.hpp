#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dfdepth {

struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // H*W*3 row-major
};

struct ImageU16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> gray;  // H*W row-major
};

// Decoders normalize any PNG color layout to the requested form and throw
// std::runtime_error naming the file on decode failure.
ImageU8 read_png_rgb8(const std::string& path);
ImageU16 read_png_gray16(const std::string& path);

void write_png_rgb8(const std::string& path, const ImageU8& img);
void write_png_gray16(const std::string& path, const ImageU16& img);

}  // namespace dfdepth
