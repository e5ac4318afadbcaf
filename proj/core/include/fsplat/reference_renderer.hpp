#pragma once

#include <vector>

#include "fsplat/camera.hpp"
#include "fsplat/gaussian_cloud.hpp"
#include "fsplat/image.hpp"
#include "fsplat/rasterizer.hpp"

namespace fsplat {

struct ReferenceRenderResult {
    Image image;
    Image depth;  // unnormalized alpha-weighted depth, same estimator as render()
    Image alpha;
    // Cloud index of the contributor with the largest blending weight per
    // pixel, -1 where nothing contributed.
    std::vector<int> dominant;
};

// Direct per-pixel evaluation of the blending sum over the full depth-sorted
// cloud, no tiling. Written against the math from scratch (own quaternion,
// Jacobian, and basis code) so it can serve as an oracle for the tiled path.
ReferenceRenderResult reference_render(const GaussianCloud& cloud, const Camera& camera,
                                       const RenderOptions& options);

}  // namespace fsplat
