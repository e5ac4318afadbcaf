#include "fsplat/projection.hpp"

namespace fsplat {

ProjectionResult project_gaussian(const Vec3& mu, const Mat3& sigma, const Camera& camera,
                                  ProjectionContext* ctx, double cov2d_floor) {
    ProjectionResult out;
    Vec3 t = camera.to_camera(mu);
    if (t.z() <= camera.near_plane * (1.0 - kCullMargin) || t.z() >= camera.far_plane) {
        return out;
    }
    double tz = t.z();
    Eigen::Matrix<double, 2, 3> J;
    J << camera.fx / tz, 0, -camera.fx * t.x() / (tz * tz),
         0, camera.fy / tz, -camera.fy * t.y() / (tz * tz);
    Mat3 W = camera.rotation();
    Eigen::Matrix<double, 2, 3> M = J * W;
    out.in_frustum = true;
    out.mean2d = camera.project(t);
    out.cov2d = M * sigma * M.transpose();
    out.cov2d(0, 0) += cov2d_floor;
    out.cov2d(1, 1) += cov2d_floor;
    out.depth = tz;
    if (ctx) {
        ctx->t_cam = t;
        ctx->W = W;
        ctx->J = J;
        ctx->sigma = sigma;
        ctx->fx = camera.fx;
        ctx->fy = camera.fy;
    }
    return out;
}

void project_gaussian_backward(const ProjectionContext& ctx, const Vec2& grad_mean2d,
                               const Mat2& grad_cov2d, double grad_depth,
                               Vec3* grad_mu, Mat3* grad_sigma) {
    const double tx = ctx.t_cam.x(), ty = ctx.t_cam.y(), tz = ctx.t_cam.z();
    const double fx = ctx.fx, fy = ctx.fy;
    Eigen::Matrix<double, 2, 3> M = ctx.J * ctx.W;

    // cov2d = M Sigma M^T
    if (grad_sigma) {
        *grad_sigma += M.transpose() * grad_cov2d * M;
    }

    Vec3 dt = Vec3::Zero();
    {
        // dM = (G + G^T) M Sigma, then dJ = dM W^T since M = J W.
        Eigen::Matrix<double, 2, 3> dM = (grad_cov2d + grad_cov2d.transpose()) * M * ctx.sigma;
        Eigen::Matrix<double, 2, 3> dJ = dM * ctx.W.transpose();
        // J depends on t through 1/tz and -f*t_{x,y}/tz^2 entries.
        dt.x() += dJ(0, 2) * (-fx / (tz * tz));
        dt.y() += dJ(1, 2) * (-fy / (tz * tz));
        dt.z() += dJ(0, 0) * (-fx / (tz * tz)) + dJ(1, 1) * (-fy / (tz * tz)) +
                  dJ(0, 2) * (2.0 * fx * tx / (tz * tz * tz)) +
                  dJ(1, 2) * (2.0 * fy * ty / (tz * tz * tz));
    }
    // mean2d = (fx tx/tz + cx, fy ty/tz + cy)
    dt.x() += grad_mean2d.x() * fx / tz;
    dt.y() += grad_mean2d.y() * fy / tz;
    dt.z() += grad_mean2d.x() * (-fx * tx / (tz * tz)) + grad_mean2d.y() * (-fy * ty / (tz * tz));
    dt.z() += grad_depth;

    if (grad_mu) {
        *grad_mu += ctx.W.transpose() * dt;
    }
}

}  // namespace fsplat
