#pragma once

#include <cstdint>
#include <vector>

#include "fsplat/camera.hpp"
#include "fsplat/covariance.hpp"
#include "fsplat/gaussian_cloud.hpp"
#include "fsplat/image.hpp"
#include "fsplat/projection.hpp"
#include "fsplat/sh.hpp"

namespace fsplat {

struct RenderOptions {
    int tile_size = 16;
    double alpha_clamp = 0.99;
    // Per-pixel blending stops once transmittance drops below this; <= 0
    // disables the cutoff (needed when checking gradients, the stop is not
    // differentiable).
    double transmittance_eps = 1e-4;
    // Gaussians contribute only inside their sigma_cutoff ellipse; tile
    // binning uses the same ellipse, which makes tiling exact rather than
    // approximate. <= 0 disables the cutoff and places every in-frustum
    // gaussian in every tile.
    double sigma_cutoff = 3.0;
    double cov2d_floor = kCov2dFloor;
    int threads = 1;
};

// Per-gaussian projection record with the saved contexts the backward pass
// consumes.
struct ProjectedGaussian {
    int cloud_index = -1;
    bool in_frustum = false;
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
    Mat2 conic = Mat2::Zero();
    double depth = 0.0;
    double sigma = 0.0;  // sigmoid(opacity_logit)
    Vec3 color = Vec3::Zero();
    Vec3 view_vec = Vec3::Zero();  // position minus camera center, unnormalized
    ProjectionContext proj_ctx;
    CovarianceContext cov_ctx;
    ShContext sh_ctx;
};

struct TileBinning {
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    // Indices into the projected array, ascending (depth, cloud_index).
    std::vector<std::vector<int>> lists;
};

// Exact test: does the level set d^T conic d <= cutoff^2 around center
// intersect the axis-aligned rectangle [x0,x1]x[y0,y1]?
bool ellipse_intersects_rect(const Vec2& center, const Mat2& conic, double cutoff,
                             double x0, double y0, double x1, double y1);

TileBinning cull_and_bin(const std::vector<ProjectedGaussian>& projected, int width, int height,
                         int tile_size, double sigma_cutoff);

struct PixelContrib {
    int32_t proj_index;
    double alpha;
};

struct RenderSavedState {
    Camera camera;
    RenderOptions options;
    size_t cloud_size = 0;
    int sh_degree = 0;
    std::vector<ProjectedGaussian> projected;
    TileBinning bins;
    // Per-pixel contributor ranges into contribs, row-major.
    std::vector<int64_t> pixel_offset;
    std::vector<int32_t> pixel_count;
    std::vector<PixelContrib> contribs;
    std::vector<double> final_transmittance;
};

struct RenderOutput {
    Image image;  // H x W x 3
    Image depth;  // H x W x 1, alpha-weighted expected depth, unnormalized
    Image alpha;  // H x W x 1
};

// Front-to-back alpha blending of the cloud splatted through camera. Colors
// come from the SH decoder with the view direction taken at each gaussian
// center. A time-varying scene is rendered by passing the already-deformed
// cloud. saved_state may be null when no backward pass is needed.
RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const RenderOptions& options,
                    RenderSavedState* saved_state);

struct RenderBackwardResult {
    CloudGrads grads;
    // Norm of the per-render accumulated screen-space positional gradient,
    // the statistic densification thresholds on.
    std::vector<double> screen_grad_norm;
    // True when the gaussian landed in at least one tile this render.
    std::vector<uint8_t> visible;
};

// grad_image / grad_depth / grad_alpha must match the shapes of the render
// outputs (empty images stand for zero gradient). The cloud must be the one
// that was rendered.
RenderBackwardResult render_backward(const GaussianCloud& cloud, const Image& grad_image,
                                     const Image& grad_depth, const Image& grad_alpha,
                                     const RenderSavedState& saved_state);

}  // namespace fsplat
