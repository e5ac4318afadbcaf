#pragma once

#include "fsplat/types.hpp"

namespace fsplat {

// Saved forward state for build_covariance_backward.
struct CovarianceContext {
    Vec4 q;       // raw quaternion as passed in
    Vec4 q_hat;   // normalized
    double q_norm = 1.0;
    Mat3 R;
    Vec3 exp2l;   // exp(2 * log_scale), the diagonal of R^T Sigma R
};

// Rotation matrix of a unit quaternion (w, x, y, z).
Mat3 quat_to_rotation(const Vec4& q_hat);

// Sigma = R * diag(exp(2l)) * R^T. The quaternion may be unnormalized; it is
// normalized here. Throws NumericError on non-finite inputs.
Mat3 build_covariance(const Vec4& rotation, const Vec3& log_scale, CovarianceContext* ctx = nullptr);

// grad_cov need not be symmetric; Sigma's entries are treated as independent
// outputs. Gradients are accumulated into the outputs.
void build_covariance_backward(const CovarianceContext& ctx, const Mat3& grad_cov,
                               Vec4* grad_rotation, Vec3* grad_log_scale);

}  // namespace fsplat
