#include "dfdepth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "dfdepth/png_io.hpp"

namespace fs = std::filesystem;

namespace dfdepth {

namespace {

double read_meta_depth_scale(const fs::path& meta_path) {
    std::ifstream in(meta_path);
    if (!in) throw std::runtime_error("dataset: missing meta file " + meta_path.string());
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line.substr(0, eq)) == "depth_scale") {
            const double v = std::stod(trim(line.substr(eq + 1)));
            if (v <= 0.0) throw std::runtime_error("dataset: depth_scale in meta must be positive");
            return v;
        }
    }
    throw std::runtime_error("dataset: meta file lacks depth_scale: " + meta_path.string());
}

struct Crop {
    int x0, y0;
};

Crop crop_origin(int width, int height, int target, int off_x, int off_y, const std::string& name) {
    if (width < target || height < target) {
        throw std::runtime_error("dataset: " + name + " is " + std::to_string(width) + "x" +
                                 std::to_string(height) + ", smaller than crop size " +
                                 std::to_string(target));
    }
    Crop c{off_x >= 0 ? off_x : (width - target) / 2, off_y >= 0 ? off_y : (height - target) / 2};
    if (c.x0 + target > width || c.y0 + target > height) {
        throw std::runtime_error("dataset: crop offset out of bounds for " + name);
    }
    return c;
}

}  // namespace

std::vector<ImageSample> load_dataset(const std::string& dir, int image_size, int crop_offset_x,
                                      int crop_offset_y) {
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw std::runtime_error("dataset: missing directory " + dir);
    const fs::path images = root / "images";
    const fs::path depths = root / "depths";
    if (!fs::is_directory(images) || !fs::is_directory(depths)) {
        throw std::runtime_error("dataset: " + dir + " must contain images/ and depths/");
    }
    const double depth_scale = read_meta_depth_scale(root / "meta");

    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(images)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            stems.push_back(entry.path().stem().string());
        }
    }
    std::sort(stems.begin(), stems.end());

    std::vector<ImageSample> samples;
    const double mm_to_norm = 1.0 / (1000.0 * depth_scale);
    for (const auto& stem : stems) {
        const fs::path img_path = images / (stem + ".png");
        const fs::path depth_path = depths / (stem + ".png");
        if (!fs::exists(depth_path)) {
            std::cerr << "warning: no depth map for " << img_path.string() << ", skipping\n";
            continue;
        }
        ImageU8 img = read_png_rgb8(img_path.string());
        ImageU16 dm = read_png_gray16(depth_path.string());
        if (img.width != dm.width || img.height != dm.height) {
            std::cerr << "warning: size mismatch between " << img_path.string() << " and "
                      << depth_path.string() << ", skipping\n";
            continue;
        }
        const Crop c = crop_origin(img.width, img.height, image_size, crop_offset_x, crop_offset_y,
                                   img_path.string());
        const std::size_t hw = static_cast<std::size_t>(image_size) * image_size;
        std::vector<double> rgb(3 * hw);
        std::vector<double> depth(hw);
        for (int y = 0; y < image_size; ++y) {
            for (int x = 0; x < image_size; ++x) {
                const std::size_t src = (static_cast<std::size_t>(y + c.y0) * img.width + (x + c.x0));
                const std::size_t dst = static_cast<std::size_t>(y) * image_size + x;
                rgb[dst] = img.rgb[src * 3] / 255.0;
                rgb[hw + dst] = img.rgb[src * 3 + 1] / 255.0;
                rgb[2 * hw + dst] = img.rgb[src * 3 + 2] / 255.0;
                depth[dst] = std::clamp(dm.gray[src] * mm_to_norm, 0.0, 1.0);
            }
        }
        ImageSample s;
        s.image = Tensor::from_data({3, image_size, image_size}, std::move(rgb));
        s.depth = Tensor::from_data({1, image_size, image_size}, std::move(depth));
        s.depth_scale = depth_scale;
        s.id = stem;
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw std::runtime_error("dataset: no image/depth pairs found in " + dir);
    return samples;
}

void write_dataset(const std::string& dir, const std::vector<ImageSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("write_dataset: no samples");
    const fs::path root(dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "depths");
    const double depth_scale = samples[0].depth_scale;

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const ImageSample& s = samples[i];
        if (s.depth_scale != depth_scale) {
            throw std::invalid_argument("write_dataset: samples disagree on depth_scale");
        }
        const int h = s.image.dim(1), w = s.image.dim(2);
        const std::size_t hw = static_cast<std::size_t>(h) * w;
        char name[16];
        std::snprintf(name, sizeof(name), "%04zu.png", i);

        ImageU8 img;
        img.width = w;
        img.height = h;
        img.rgb.resize(hw * 3);
        for (std::size_t p = 0; p < hw; ++p) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(s.image.data()[static_cast<std::size_t>(c) * hw + p], 0.0, 1.0);
                img.rgb[p * 3 + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
        write_png_rgb8((root / "images" / name).string(), img);

        ImageU16 dm;
        dm.width = w;
        dm.height = h;
        dm.gray.resize(hw);
        for (std::size_t p = 0; p < hw; ++p) {
            const double mm = std::clamp(s.depth.data()[p], 0.0, 1.0) * depth_scale * 1000.0;
            dm.gray[p] = static_cast<std::uint16_t>(std::lround(std::min(mm, 65535.0)));
        }
        write_png_gray16((root / "depths" / name).string(), dm);
    }
    std::ofstream meta(root / "meta");
    meta << "depth_scale = " << depth_scale << "\n";
}

}  // namespace dfdepth
