#include "fsplat/covariance.hpp"

#include <cmath>

#include "fsplat/errors.hpp"

namespace fsplat {

Mat3 quat_to_rotation(const Vec4& q) {
    double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Mat3 build_covariance(const Vec4& rotation, const Vec3& log_scale, CovarianceContext* ctx) {
    if (!rotation.allFinite() || !log_scale.allFinite()) {
        throw NumericError("build_covariance: non-finite rotation or log_scale");
    }
    double norm = rotation.norm();
    if (norm < 1e-12) throw NumericError("build_covariance: zero quaternion");
    Vec4 q_hat = rotation / norm;
    Mat3 R = quat_to_rotation(q_hat);
    Vec3 exp2l = (2.0 * log_scale).array().exp();
    Mat3 cov = R * exp2l.asDiagonal() * R.transpose();
    if (ctx) {
        ctx->q = rotation;
        ctx->q_hat = q_hat;
        ctx->q_norm = norm;
        ctx->R = R;
        ctx->exp2l = exp2l;
    }
    return cov;
}

namespace {

// dR/dq_hat[k] for the normalized quaternion (w, x, y, z).
Mat3 rotation_partial(const Vec4& q, int k) {
    double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 d;
    switch (k) {
        case 0:
            d << 0, -z, y,
                 z, 0, -x,
                 -y, x, 0;
            break;
        case 1:
            d << 0, y, z,
                 y, -2 * x, -w,
                 z, w, -2 * x;
            break;
        case 2:
            d << -2 * y, x, w,
                 x, 0, z,
                 -w, z, -2 * y;
            break;
        default:
            d << -2 * z, -w, x,
                 w, -2 * z, y,
                 x, y, 0;
            break;
    }
    return 2.0 * d;
}

}  // namespace

void build_covariance_backward(const CovarianceContext& ctx, const Mat3& grad_cov,
                               Vec4* grad_rotation, Vec3* grad_log_scale) {
    // Sigma = R D R^T with D = diag(exp(2l)).
    Mat3 G = grad_cov;
    Mat3 dR = (G + G.transpose()) * ctx.R * ctx.exp2l.asDiagonal();
    Mat3 RtGR = ctx.R.transpose() * G * ctx.R;
    if (grad_log_scale) {
        for (int k = 0; k < 3; ++k) {
            (*grad_log_scale)[k] += RtGR(k, k) * 2.0 * ctx.exp2l[k];
        }
    }
    if (grad_rotation) {
        Vec4 dq_hat;
        for (int k = 0; k < 4; ++k) {
            dq_hat[k] = (dR.array() * rotation_partial(ctx.q_hat, k).array()).sum();
        }
        // Through q_hat = q / |q|.
        Vec4 dq = (dq_hat - ctx.q_hat * ctx.q_hat.dot(dq_hat)) / ctx.q_norm;
        *grad_rotation += dq;
    }
}

}  // namespace fsplat
