#include "fsplat/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "fsplat/errors.hpp"

namespace fsplat {

namespace {

struct FileHandle {
    FILE* fp = nullptr;
    explicit FileHandle(const std::string& path, const char* mode) : fp(fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (fp) fclose(fp);
    }
};

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

uint8_t quantize8(double v) {
    double c = v < 0 ? 0 : (v > 1 ? 1 : v);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

}  // namespace

Image read_png_rgb(const std::string& path) {
    FileHandle file(path, "rb");
    if (!file.fp) throw DataError("cannot open image: " + path);
    PngReader r;
    if (!r.png || !r.info) throw DataError("libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw DataError("failed to decode png: " + path);
    png_init_io(r.png, file.fp);
    png_read_info(r.png, r.info);

    png_uint_32 w = png_get_image_width(r.png, r.info);
    png_uint_32 h = png_get_image_height(r.png, r.info);
    int color = png_get_color_type(r.png, r.info);
    int depth = png_get_bit_depth(r.png, r.info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (depth == 16) png_set_strip_16(r.png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(r.png);
    }
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    std::vector<uint8_t> row(png_get_rowbytes(r.png, r.info));
    require(row.size() == static_cast<size_t>(w) * 3, "png_io: unexpected row size");
    Image img(static_cast<int>(h), static_cast<int>(w), 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(r.png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[x * 3 + c] / 255.0;
        }
    }
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_rgb(const std::string& path, const Image& img) {
    require(img.channels() == 3, "write_png_rgb: need 3 channels");
    FileHandle file(path, "wb");
    if (!file.fp) throw DataError("cannot open image for writing: " + path);
    PngWriter w;
    if (!w.png || !w.info) throw DataError("libpng init failed");
    if (setjmp(png_jmpbuf(w.png))) throw DataError("failed to encode png: " + path);
    png_init_io(w.png, file.fp);
    png_set_IHDR(w.png, w.info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) row[x * 3 + c] = quantize8(img.at(y, x, c));
        }
        png_write_row(w.png, row.data());
    }
    png_write_end(w.png, nullptr);
}

Image read_png_gray16(const std::string& path, double scale) {
    FileHandle file(path, "rb");
    if (!file.fp) throw DataError("cannot open depth map: " + path);
    PngReader r;
    if (!r.png || !r.info) throw DataError("libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw DataError("failed to decode png: " + path);
    png_init_io(r.png, file.fp);
    png_read_info(r.png, r.info);

    png_uint_32 w = png_get_image_width(r.png, r.info);
    png_uint_32 h = png_get_image_height(r.png, r.info);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 16) {
        throw DataError("depth map must be 16-bit grayscale: " + path);
    }
    png_set_swap(r.png);
    png_read_update_info(r.png, r.info);

    std::vector<uint16_t> row(w);
    Image img(static_cast<int>(h), static_cast<int>(w), 1);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(r.png, reinterpret_cast<png_bytep>(row.data()), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) img.at(y, x, 0) = row[x] * scale;
    }
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_gray16(const std::string& path, const Image& img, double scale) {
    require(img.channels() == 1, "write_png_gray16: need 1 channel");
    require(scale > 0, "write_png_gray16: scale must be positive");
    FileHandle file(path, "wb");
    if (!file.fp) throw DataError("cannot open depth map for writing: " + path);
    PngWriter w;
    if (!w.png || !w.info) throw DataError("libpng init failed");
    if (setjmp(png_jmpbuf(w.png))) throw DataError("failed to encode png: " + path);
    png_init_io(w.png, file.fp);
    png_set_IHDR(w.png, w.info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_set_swap(w.png);
    std::vector<uint16_t> row(img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            long ticks = std::lround(img.at(y, x, 0) / scale);
            row[x] = static_cast<uint16_t>(ticks < 0 ? 0 : (ticks > 65535 ? 65535 : ticks));
        }
        png_write_row(w.png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(w.png, nullptr);
}

Image read_png_mask(const std::string& path) {
    Image rgb = read_png_rgb(path);
    Image mask(rgb.height(), rgb.width(), 1);
    for (int y = 0; y < rgb.height(); ++y) {
        for (int x = 0; x < rgb.width(); ++x) {
            mask.at(y, x, 0) = rgb.at(y, x, 0) >= 0.5 ? 1.0 : 0.0;
        }
    }
    return mask;
}

void write_png_mask(const std::string& path, const Image& mask) {
    require(mask.channels() == 1, "write_png_mask: need 1 channel");
    Image rgb(mask.height(), mask.width(), 3);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            double v = mask.at(y, x, 0) != 0.0 ? 1.0 : 0.0;
            for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = v;
        }
    }
    write_png_rgb(path, rgb);
}

}  // namespace fsplat
