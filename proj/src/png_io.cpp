#include "dfdepth/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace dfdepth {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
    throw std::runtime_error("png: " + std::string(what) + ": " + path);
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

void open_reader(PngReader& r, std::FILE* f, const std::string& path) {
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f) != 8 || png_sig_cmp(sig, 0, 8) != 0) fail(path, "not a PNG file");
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) fail(path, "out of memory");
    r.info = png_create_info_struct(r.png);
    if (!r.info) fail(path, "out of memory");
    png_init_io(r.png, f);
    png_set_sig_bytes(r.png, 8);
}

}  // namespace

ImageU8 read_png_rgb8(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail(path, "cannot open");
    PngReader r;
    open_reader(r, f.get(), path);
    if (setjmp(png_jmpbuf(r.png))) fail(path, "corrupt PNG");

    png_read_info(r.png, r.info);
    png_set_expand(r.png);           // palette/gray/low-depth -> 8-bit
    png_set_strip_16(r.png);         // 16-bit -> 8-bit
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    ImageU8 img;
    img.width = static_cast<int>(png_get_image_width(r.png, r.info));
    img.height = static_cast<int>(png_get_image_height(r.png, r.info));
    if (png_get_channels(r.png, r.info) != 3 || png_get_bit_depth(r.png, r.info) != 8) {
        fail(path, "unsupported layout after RGB8 conversion");
    }
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)] = img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
    }
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

ImageU16 read_png_gray16(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail(path, "cannot open");
    PngReader r;
    open_reader(r, f.get(), path);
    if (setjmp(png_jmpbuf(r.png))) fail(path, "corrupt PNG");

    png_read_info(r.png, r.info);
    const int color = png_get_color_type(r.png, r.info);
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
        fail(path, "depth PNG must be grayscale");
    }
    png_set_expand_16(r.png);  // 8-bit gray scales to 16-bit
    png_set_strip_alpha(r.png);
    png_set_swap(r.png);       // PNG is big-endian on the wire
    png_read_update_info(r.png, r.info);

    ImageU16 img;
    img.width = static_cast<int>(png_get_image_width(r.png, r.info));
    img.height = static_cast<int>(png_get_image_height(r.png, r.info));
    if (png_get_channels(r.png, r.info) != 1 || png_get_bit_depth(r.png, r.info) != 16) {
        fail(path, "unsupported layout after gray16 conversion");
    }
    img.gray.resize(static_cast<std::size_t>(img.width) * img.height);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            reinterpret_cast<png_bytep>(img.gray.data() + static_cast<std::size_t>(y) * img.width);
    }
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_rgb8(const std::string& path, const ImageU8& img) {
    if (img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw std::invalid_argument("png: RGB8 buffer size mismatch for " + path);
    }
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail(path, "cannot open for writing");
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) fail(path, "out of memory");
    w.info = png_create_info_struct(w.png);
    if (!w.info) fail(path, "out of memory");
    if (setjmp(png_jmpbuf(w.png))) fail(path, "write failed");

    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    for (int y = 0; y < img.height; ++y) {
        png_write_row(w.png, const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3));
    }
    png_write_end(w.png, nullptr);
}

void write_png_gray16(const std::string& path, const ImageU16& img) {
    if (img.gray.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw std::invalid_argument("png: gray16 buffer size mismatch for " + path);
    }
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail(path, "cannot open for writing");
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) fail(path, "out of memory");
    w.info = png_create_info_struct(w.png);
    if (!w.info) fail(path, "out of memory");
    if (setjmp(png_jmpbuf(w.png))) fail(path, "write failed");

    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_set_swap(w.png);
    for (int y = 0; y < img.height; ++y) {
        png_write_row(w.png, reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(
                                 img.gray.data() + static_cast<std::size_t>(y) * img.width)));
    }
    png_write_end(w.png, nullptr);
}

}  // namespace dfdepth
