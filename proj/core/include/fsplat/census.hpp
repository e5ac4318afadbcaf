#pragma once

#include "fsplat/image.hpp"

namespace fsplat {

struct CensusOptions {
    int window = 7;
    double tau = 0.81;     // squash scale for center-to-neighbor differences
    double rho_eps = 0.1;  // soft-Hamming saturation constant
};

// Soft ternary census distance between two frames: per pixel, neighbor
// differences squashed by x/sqrt(x^2 + tau^2), compared with the
// soft-Hamming d^2/(d^2 + rho_eps), averaged over the in-bounds offsets, then
// averaged over valid pixels. Invariant to additive brightness shifts.
// valid is H x W x 1 with 1 = include (empty means all pixels). grad_a, when
// non-null, accumulates d(loss)/d(image_a); the loss itself is symmetric.
double census_loss(const Image& image_a, const Image& image_b, const CensusOptions& options,
                   const Image& valid, Image* grad_a);

}  // namespace fsplat
