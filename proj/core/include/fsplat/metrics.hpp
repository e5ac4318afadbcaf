#pragma once

#include "fsplat/image.hpp"

namespace fsplat {

// 10*log10(1/MSE) for [0,1] images; +inf when the images are identical.
double psnr(const Image& a, const Image& b);

// Gaussian-windowed structural similarity, 11x11 window with sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1. Window centers keep the full
// window inside the image; the result is the mean over channels.
double ssim(const Image& a, const Image& b);

}  // namespace fsplat
