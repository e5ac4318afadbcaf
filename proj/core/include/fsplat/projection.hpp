#pragma once

#include "fsplat/camera.hpp"
#include "fsplat/types.hpp"

namespace fsplat {

struct ProjectionResult {
    bool in_frustum = false;
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();  // includes the diagonal floor
    double depth = 0.0;         // camera-space z
};

struct ProjectionContext {
    Vec3 t_cam;
    Mat3 W;                      // camera rotation block
    Eigen::Matrix<double, 2, 3> J;
    Mat3 sigma;                  // world covariance as passed in
    double fx = 0.0, fy = 0.0;
};

// Pixel-space cov2d variance floor. Keeps the 2x2 conic invertible for
// degenerate (sub-pixel) footprints.
constexpr double kCov2dFloor = 0.3;

// Culls when camera z <= near * (1 - margin); the margin admits points
// marginally inside the near plane.
constexpr double kCullMargin = 0.01;

ProjectionResult project_gaussian(const Vec3& mu, const Mat3& sigma, const Camera& camera,
                                  ProjectionContext* ctx = nullptr,
                                  double cov2d_floor = kCov2dFloor);

// Accumulates into grad_mu / grad_sigma. grad_cov2d is treated entrywise (no
// symmetry assumption); the diagonal floor is additive so it passes through.
void project_gaussian_backward(const ProjectionContext& ctx, const Vec2& grad_mean2d,
                               const Mat2& grad_cov2d, double grad_depth,
                               Vec3* grad_mu, Mat3* grad_sigma);

}  // namespace fsplat
