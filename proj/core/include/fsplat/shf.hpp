#pragma once

#include "fsplat/image.hpp"

namespace fsplat {

// Weight map |high_freq_image(gt)|: large where the ground truth carries
// high-frequency detail. Depends on the ground truth only, so it can be
// computed once per frame and cached.
Image shf_weight_map(const Image& gt, double radius_ratio);

struct ShfResult {
    double loss = 0.0;
    Image grad_rendered;
};

// Sum over pixels and channels of w * |gt - rendered|. The weight map is a
// constant of the optimization; gradient w.r.t. the rendered image is
// -w * sign(gt - rendered), zero at exact equality.
ShfResult shf_loss_with_weights(const Image& weights, const Image& gt, const Image& rendered);
ShfResult shf_loss(const Image& gt, const Image& rendered, double radius_ratio);

}  // namespace fsplat
