#include "fsplat/reference_renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsplat/errors.hpp"

namespace fsplat {

namespace {

struct Splat {
    int index;
    double z;
    double mx, my;          // projected mean, pixels
    double a, b, c;         // cov2d entries [[a, b], [b, c]] after the floor
    double ia, ib, ic;      // conic
    double opacity;
    double rgb[3];
};

}  // namespace

ReferenceRenderResult reference_render(const GaussianCloud& cloud, const Camera& camera,
                                       const RenderOptions& options) {
    const int W = camera.width, H = camera.height;
    ReferenceRenderResult out;
    out.image = Image(H, W, 3);
    out.depth = Image(H, W, 1);
    out.alpha = Image(H, W, 1);
    out.dominant.assign(static_cast<size_t>(W) * H, -1);

    const double Wr[3][3] = {
        {camera.world_to_camera(0, 0), camera.world_to_camera(0, 1), camera.world_to_camera(0, 2)},
        {camera.world_to_camera(1, 0), camera.world_to_camera(1, 1), camera.world_to_camera(1, 2)},
        {camera.world_to_camera(2, 0), camera.world_to_camera(2, 1), camera.world_to_camera(2, 2)}};
    const double Wt[3] = {camera.world_to_camera(0, 3), camera.world_to_camera(1, 3),
                          camera.world_to_camera(2, 3)};
    // Camera center: -W^T t.
    double cam_center[3];
    for (int r = 0; r < 3; ++r) {
        cam_center[r] = -(Wr[0][r] * Wt[0] + Wr[1][r] * Wt[1] + Wr[2][r] * Wt[2]);
    }

    std::vector<Splat> splats;
    splats.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& mu = cloud.positions[i];
        double t[3];
        for (int r = 0; r < 3; ++r) {
            t[r] = Wr[r][0] * mu.x() + Wr[r][1] * mu.y() + Wr[r][2] * mu.z() + Wt[r];
        }
        if (t[2] <= camera.near_plane * 0.99 || t[2] >= camera.far_plane) continue;

        // Rotation from the normalized quaternion.
        double qw = cloud.rotations[i][0], qx = cloud.rotations[i][1], qy = cloud.rotations[i][2],
               qz = cloud.rotations[i][3];
        double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
        qw /= qn; qx /= qn; qy /= qn; qz /= qn;
        double R[3][3] = {
            {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz), 2 * (qx * qz + qw * qy)},
            {2 * (qx * qy + qw * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx)},
            {2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx), 1 - 2 * (qx * qx + qy * qy)}};
        double d2[3] = {std::exp(2 * cloud.log_scales[i][0]), std::exp(2 * cloud.log_scales[i][1]),
                        std::exp(2 * cloud.log_scales[i][2])};
        double S[3][3];
        for (int r = 0; r < 3; ++r) {
            for (int cc = 0; cc < 3; ++cc) {
                S[r][cc] = R[r][0] * d2[0] * R[cc][0] + R[r][1] * d2[1] * R[cc][1] +
                           R[r][2] * d2[2] * R[cc][2];
            }
        }

        // Rows of J*W, with J the 2x3 pinhole Jacobian at t.
        double tz = t[2];
        double J[2][3] = {{camera.fx / tz, 0, -camera.fx * t[0] / (tz * tz)},
                          {0, camera.fy / tz, -camera.fy * t[1] / (tz * tz)}};
        double M[2][3];
        for (int r = 0; r < 2; ++r) {
            for (int cc = 0; cc < 3; ++cc) {
                M[r][cc] = J[r][0] * Wr[0][cc] + J[r][1] * Wr[1][cc] + J[r][2] * Wr[2][cc];
            }
        }
        double MS[2][3];
        for (int r = 0; r < 2; ++r) {
            for (int cc = 0; cc < 3; ++cc) {
                MS[r][cc] = M[r][0] * S[0][cc] + M[r][1] * S[1][cc] + M[r][2] * S[2][cc];
            }
        }
        Splat sp;
        sp.index = static_cast<int>(i);
        sp.z = tz;
        sp.mx = camera.fx * t[0] / tz + camera.cx;
        sp.my = camera.fy * t[1] / tz + camera.cy;
        sp.a = MS[0][0] * M[0][0] + MS[0][1] * M[0][1] + MS[0][2] * M[0][2] + options.cov2d_floor;
        sp.b = MS[0][0] * M[1][0] + MS[0][1] * M[1][1] + MS[0][2] * M[1][2];
        sp.c = MS[1][0] * M[1][0] + MS[1][1] * M[1][1] + MS[1][2] * M[1][2] + options.cov2d_floor;
        double det = sp.a * sp.c - sp.b * sp.b;
        require(det > 0, "reference_render: singular 2d covariance");
        sp.ia = sp.c / det;
        sp.ib = -sp.b / det;
        sp.ic = sp.a / det;
        sp.opacity = 1.0 / (1.0 + std::exp(-cloud.opacity_logits[i]));

        double vx = mu.x() - cam_center[0], vy = mu.y() - cam_center[1],
               vz = mu.z() - cam_center[2];
        double vn = std::sqrt(vx * vx + vy * vy + vz * vz);
        if (vn > 1e-12) { vx /= vn; vy /= vn; vz /= vn; }
        else { vx = 0; vy = 0; vz = 1; }
        const double* sh = cloud.sh_ptr(i);
        const double C0 = 0.28209479177387814;
        const double C1 = 0.4886025119029199;
        for (int ch = 0; ch < 3; ++ch) {
            double v = 0.5 + C0 * sh[ch];
            if (cloud.sh_degree >= 1) {
                v += -C1 * vy * sh[3 + ch] + C1 * vz * sh[6 + ch] - C1 * vx * sh[9 + ch];
            }
            sp.rgb[ch] = std::clamp(v, 0.0, 1.0);
        }
        splats.push_back(sp);
    }

    std::stable_sort(splats.begin(), splats.end(), [](const Splat& l, const Splat& r) {
        if (l.z != r.z) return l.z < r.z;
        return l.index < r.index;
    });

    const double cutoff2 = options.sigma_cutoff > 0
                               ? options.sigma_cutoff * options.sigma_cutoff
                               : std::numeric_limits<double>::infinity();
    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            double T = 1.0;
            double rgb[3] = {0, 0, 0};
            double depth = 0.0;
            double best_w = 0.0;
            int best_idx = -1;
            for (const Splat& sp : splats) {
                double dx = px + 0.5 - sp.mx;
                double dy = py + 0.5 - sp.my;
                double q = sp.ia * dx * dx + 2 * sp.ib * dx * dy + sp.ic * dy * dy;
                if (q > cutoff2) continue;
                double alpha = std::min(sp.opacity * std::exp(-0.5 * q), options.alpha_clamp);
                double w = alpha * T;
                for (int ch = 0; ch < 3; ++ch) rgb[ch] += sp.rgb[ch] * w;
                depth += sp.z * w;
                if (w > best_w) {
                    best_w = w;
                    best_idx = sp.index;
                }
                T *= (1.0 - alpha);
                if (options.transmittance_eps > 0 && T < options.transmittance_eps) break;
            }
            out.image.at(py, px, 0) = rgb[0];
            out.image.at(py, px, 1) = rgb[1];
            out.image.at(py, px, 2) = rgb[2];
            out.depth.at(py, px, 0) = depth;
            out.alpha.at(py, px, 0) = 1.0 - T;
            out.dominant[static_cast<size_t>(py) * W + px] = best_idx;
        }
    }
    return out;
}

}  // namespace fsplat
