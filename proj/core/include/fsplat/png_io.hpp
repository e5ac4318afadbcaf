#pragma once

#include <string>

#include "fsplat/image.hpp"

namespace fsplat {

// 8-bit RGB. Values clamp to [0,1] on write; palette/gray/alpha inputs are
// normalized to 3 channels on read.
Image read_png_rgb(const std::string& path);
void write_png_rgb(const std::string& path, const Image& img);

// 16-bit grayscale fixed point: stored tick * scale = value. Depth maps use
// this with the scale recorded in the dataset metadata.
Image read_png_gray16(const std::string& path, double scale);
void write_png_gray16(const std::string& path, const Image& img, double scale);

// 8-bit grayscale thresholded at 128 into {0,1}.
Image read_png_mask(const std::string& path);
void write_png_mask(const std::string& path, const Image& mask);

}  // namespace fsplat
