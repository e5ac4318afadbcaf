#pragma once

#include "fsplat/image.hpp"

namespace fsplat {

// Scalar-field primitives for the flow stack. Fields are H x W x 1 images.
// Every op has an adjoint/backward so flow estimates stay differentiable in
// the input frames.

// Rec.601 luma. Single-channel input passes through.
Image rgb_to_gray(const Image& image);
void rgb_to_gray_backward(const Image& grad_gray, Image* grad_image);

// Central differences, replicate borders (half-step one-sided at the edge).
void central_gradients(const Image& gray, Image* gx, Image* gy);
void central_gradients_adjoint(const Image& grad_gx, const Image& grad_gy, Image* grad_gray);

// Unnormalized (2r+1)^2 window sum, truncated at borders (zero padding).
// Truncation keeps the operator self-adjoint, which the backward pass uses.
Image box_sum(const Image& field, int radius);

// 3-tap [1/4, 1/2, 1/4] separable downsample, stride 2, replicate borders.
// Output dims are ceil(n / 2).
Image downsample2(const Image& field);
void downsample2_adjoint(const Image& grad_down, Image* grad_src);

// Bilinear resize to the preallocated shape of dst (half-pixel-aligned
// sampling, clamped at borders).
void upsample_bilinear(const Image& src, Image* dst);
void upsample_bilinear_adjoint(const Image& grad_dst, Image* grad_src);

// out(y, x) = src sampled at (x + u(y,x), y + v(y,x)), bilinear, coordinates
// clamped into the grid.
Image warp_bilinear(const Image& src, const Image& u, const Image& v);
// Scatters into grad_src and accumulates the sample-coordinate chain into
// grad_u/grad_v (zero where the coordinate clamp was active). Pointers may be
// null.
void warp_bilinear_backward(const Image& src, const Image& u, const Image& v,
                            const Image& grad_out, Image* grad_src, Image* grad_u, Image* grad_v);

}  // namespace fsplat
