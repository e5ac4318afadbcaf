#pragma once

#include "fsplat/types.hpp"

namespace fsplat {

// Real spherical harmonic basis constants (l=0 and l=1).
constexpr double kShC0 = 0.28209479177387814;
constexpr double kShC1 = 0.4886025119029199;

struct ShContext {
    int degree = 0;
    Vec3 view_dir = Vec3::Zero();   // unit vector, gaussian center minus camera center
    double coeffs[12] = {0};        // copy of the coefficients used, coefficient-major
    bool clamped_low[3] = {false, false, false};
    bool clamped_high[3] = {false, false, false};
};

// Decodes rgb = clamp(0.5 + basis . coeffs, 0, 1). sh points at the gaussian's
// coefficient block, layout [c0.r, c0.g, c0.b, c1.r, ...]. view_dir is ignored
// for degree 0.
Vec3 sh_to_color(const double* sh, int degree, const Vec3& view_dir, ShContext* ctx = nullptr);

// Accumulates into grad_sh (same layout as the forward coefficients) and
// grad_view_dir. Channels clamped in the forward pass receive zero gradient.
void sh_to_color_backward(const ShContext& ctx, const Vec3& grad_rgb, double* grad_sh,
                          Vec3* grad_view_dir);

// Backward of normalizing v to unit length: maps the gradient with respect to
// v/|v| onto v itself.
Vec3 normalize_backward(const Vec3& v, const Vec3& grad_unit);

}  // namespace fsplat
