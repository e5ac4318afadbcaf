#pragma once

#include "fsplat/image.hpp"

namespace fsplat {

// Amplitude/phase decomposition of a per-channel 2D DFT. centered means the
// DC bin sits at (floor(H/2), floor(W/2)).
struct Spectrum {
    Image amplitude;
    Image phase;
    bool centered = true;
};

// Unnormalized forward DFT per channel, center-shifted. A constant image c
// produces amplitude H*W*c at the DC bin.
Spectrum fft2(const Image& image);

// Inverse of fft2 (applies the 1/(H*W) factor); returns the real part.
Image ifft2(const Spectrum& spectrum);

struct FrequencyMask {
    Image mask;  // H x W x 1, binary
    double radius_ratio = 0.25;
};

// Binary disc of radius radius_ratio * min(H,W)/2 around the centered DC bin,
// inclusive of the boundary.
FrequencyMask make_frequency_mask(int height, int width, double radius_ratio);

// Zeroes the amplitude inside the low-frequency disc (keep_low false) or
// outside it (keep_low true), phase preserved, and inverse-transforms.
Image filter_frequencies(const Image& image, double radius_ratio, bool keep_low);

// The high-frequency residual: disc complement applied to the spectrum.
Image high_freq_image(const Image& image, double radius_ratio);

}  // namespace fsplat
