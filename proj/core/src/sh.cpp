#include "fsplat/sh.hpp"

#include <algorithm>

#include "fsplat/errors.hpp"

namespace fsplat {

Vec3 sh_to_color(const double* sh, int degree, const Vec3& view_dir, ShContext* ctx) {
    require(degree == 0 || degree == 1, "sh_to_color: degree must be 0 or 1");
    Vec3 rgb;
    for (int c = 0; c < 3; ++c) {
        double v = 0.5 + kShC0 * sh[c];
        if (degree >= 1) {
            double x = view_dir.x(), y = view_dir.y(), z = view_dir.z();
            v += -kShC1 * y * sh[3 + c] + kShC1 * z * sh[6 + c] - kShC1 * x * sh[9 + c];
        }
        rgb[c] = std::clamp(v, 0.0, 1.0);
        if (ctx) {
            ctx->clamped_low[c] = v < 0.0;
            ctx->clamped_high[c] = v > 1.0;
        }
    }
    if (ctx) {
        ctx->degree = degree;
        ctx->view_dir = view_dir;
        int n = (degree == 0) ? 3 : 12;
        std::copy(sh, sh + n, ctx->coeffs);
    }
    return rgb;
}

void sh_to_color_backward(const ShContext& ctx, const Vec3& grad_rgb, double* grad_sh,
                          Vec3* grad_view_dir) {
    for (int c = 0; c < 3; ++c) {
        if (ctx.clamped_low[c] || ctx.clamped_high[c]) continue;
        double g = grad_rgb[c];
        if (grad_sh) grad_sh[c] += g * kShC0;
        if (ctx.degree >= 1) {
            double x = ctx.view_dir.x(), y = ctx.view_dir.y(), z = ctx.view_dir.z();
            if (grad_sh) {
                grad_sh[3 + c] += g * (-kShC1 * y);
                grad_sh[6 + c] += g * (kShC1 * z);
                grad_sh[9 + c] += g * (-kShC1 * x);
            }
            if (grad_view_dir) {
                grad_view_dir->x() += g * (-kShC1 * ctx.coeffs[9 + c]);
                grad_view_dir->y() += g * (-kShC1 * ctx.coeffs[3 + c]);
                grad_view_dir->z() += g * (kShC1 * ctx.coeffs[6 + c]);
            }
        }
    }
}

Vec3 normalize_backward(const Vec3& v, const Vec3& grad_unit) {
    double n = v.norm();
    Vec3 u = v / n;
    return (grad_unit - u * u.dot(grad_unit)) / n;
}

}  // namespace fsplat
