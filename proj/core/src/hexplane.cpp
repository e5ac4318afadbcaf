#include "fsplat/hexplane.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fsplat/errors.hpp"

namespace fsplat {

namespace {

struct BilinearWeights {
    int i0, j0;
    double fu, fv;
};

BilinearWeights locate(const PlaneGrid& plane, double u, double v) {
    u = std::clamp(u, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    double gu = u * (plane.n1 - 1);
    double gv = v * (plane.n2 - 1);
    BilinearWeights w;
    w.i0 = std::min(static_cast<int>(gu), plane.n1 - 2);
    w.j0 = std::min(static_cast<int>(gv), plane.n2 - 2);
    w.fu = gu - w.i0;
    w.fv = gv - w.j0;
    return w;
}

// (u, v) query coordinates of the six planes for a normalized point.
void plane_coords(const Vec3& s, double tau, double u[6], double v[6]) {
    u[kPlaneXY] = s.x(); v[kPlaneXY] = s.y();
    u[kPlaneXZ] = s.x(); v[kPlaneXZ] = s.z();
    u[kPlaneYZ] = s.y(); v[kPlaneYZ] = s.z();
    u[kPlaneXT] = s.x(); v[kPlaneXT] = tau;
    u[kPlaneYT] = s.y(); v[kPlaneYT] = tau;
    u[kPlaneZT] = s.z(); v[kPlaneZT] = tau;
}

}  // namespace

void interpolate_plane(const PlaneGrid& plane, double u, double v, double* out) {
    require(plane.n1 >= 2 && plane.n2 >= 2, "interpolate_plane: grid needs at least 2x2 nodes");
    BilinearWeights w = locate(plane, u, v);
    const double* f00 = plane.node(w.i0, w.j0);
    const double* f10 = plane.node(w.i0 + 1, w.j0);
    const double* f01 = plane.node(w.i0, w.j0 + 1);
    const double* f11 = plane.node(w.i0 + 1, w.j0 + 1);
    for (int c = 0; c < plane.width; ++c) {
        out[c] = (1 - w.fu) * (1 - w.fv) * f00[c] + w.fu * (1 - w.fv) * f10[c] +
                 (1 - w.fu) * w.fv * f01[c] + w.fu * w.fv * f11[c];
    }
}

void interpolate_plane_backward(const PlaneGrid& plane, double u, double v, const double* grad_out,
                                PlaneGrid* grad_plane, double* du, double* dv) {
    BilinearWeights w = locate(plane, u, v);
    const double* f00 = plane.node(w.i0, w.j0);
    const double* f10 = plane.node(w.i0 + 1, w.j0);
    const double* f01 = plane.node(w.i0, w.j0 + 1);
    const double* f11 = plane.node(w.i0 + 1, w.j0 + 1);
    double dgu = 0.0, dgv = 0.0;
    for (int c = 0; c < plane.width; ++c) {
        double g = grad_out[c];
        if (grad_plane) {
            grad_plane->node(w.i0, w.j0)[c] += g * (1 - w.fu) * (1 - w.fv);
            grad_plane->node(w.i0 + 1, w.j0)[c] += g * w.fu * (1 - w.fv);
            grad_plane->node(w.i0, w.j0 + 1)[c] += g * (1 - w.fu) * w.fv;
            grad_plane->node(w.i0 + 1, w.j0 + 1)[c] += g * w.fu * w.fv;
        }
        dgu += g * ((1 - w.fv) * (f10[c] - f00[c]) + w.fv * (f11[c] - f01[c]));
        dgv += g * ((1 - w.fu) * (f01[c] - f00[c]) + w.fu * (f11[c] - f10[c]));
    }
    // Zero outside [0,1]: the clamp is flat there.
    bool u_interior = u > 0.0 && u < 1.0;
    bool v_interior = v > 0.0 && v < 1.0;
    if (du) *du += u_interior ? dgu * (plane.n1 - 1) : 0.0;
    if (dv) *dv += v_interior ? dgv * (plane.n2 - 1) : 0.0;
}

void HexPlaneConfig::validate() const {
    if (levels < 1) throw ConfigError("hexplane levels must be >= 1");
    if (base_spatial_res < 2 || base_time_res < 2) {
        throw ConfigError("hexplane base resolutions must be >= 2");
    }
    if (level_scale < 2 && levels > 1) {
        throw ConfigError("hexplane level_scale must be >= 2 so resolutions increase");
    }
    if (feature_width < 1) throw ConfigError("hexplane feature_width must be >= 1");
}

int HexPlaneConfig::spatial_res(int level) const {
    int r = base_spatial_res;
    for (int i = 0; i < level; ++i) r *= level_scale;
    return r;
}

int HexPlaneConfig::time_res(int level) const {
    int r = base_time_res;
    for (int i = 0; i < level; ++i) r *= level_scale;
    return r;
}

void HexPlanes::init(const HexPlaneConfig& cfg, const Vec3& bmin, const Vec3& bmax, uint64_t seed) {
    cfg.validate();
    require((bmax - bmin).minCoeff() > 0, "hexplane bounds must have positive extent");
    config = cfg;
    bounds_min = bmin;
    bounds_max = bmax;
    levels.resize(cfg.levels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-cfg.init_scale, cfg.init_scale);
    for (int l = 0; l < cfg.levels; ++l) {
        int ns = cfg.spatial_res(l);
        int nt = cfg.time_res(l);
        for (int p = 0; p < 6; ++p) {
            bool temporal = p >= kPlaneXT;
            int n2 = temporal ? nt : ns;
            levels[l][p].resize(ns, n2, cfg.feature_width, temporal ? 1.0 : 0.0);
            if (!temporal) {
                for (double& x : levels[l][p].data) x = dist(rng);
            }
        }
    }
}

void HexPlanes::zero_like(const HexPlanes& other) {
    config = other.config;
    bounds_min = other.bounds_min;
    bounds_max = other.bounds_max;
    levels.resize(other.levels.size());
    for (size_t l = 0; l < levels.size(); ++l) {
        for (int p = 0; p < 6; ++p) {
            const PlaneGrid& src = other.levels[l][p];
            levels[l][p].resize(src.n1, src.n2, src.width, 0.0);
        }
    }
}

size_t HexPlanes::parameter_count() const {
    size_t n = 0;
    for (const auto& level : levels) {
        for (const auto& plane : level) n += plane.data.size();
    }
    return n;
}

Eigen::VectorXd hexplane_features(const HexPlanes& field, const Vec3& position, double t) {
    const int h = field.config.feature_width;
    Eigen::VectorXd out(field.feature_dim());
    Vec3 ext = field.bounds_max - field.bounds_min;
    Vec3 s = ((position - field.bounds_min).array() / ext.array())
                 .cwiseMax(0.0)
                 .cwiseMin(1.0)
                 .matrix();
    double tau = std::clamp(t, 0.0, 1.0);
    double u[6], v[6];
    plane_coords(s, tau, u, v);

    std::vector<double> factor(h);
    for (size_t l = 0; l < field.levels.size(); ++l) {
        double* dst = out.data() + l * h;
        std::fill(dst, dst + h, 1.0);
        for (int p = 0; p < 6; ++p) {
            interpolate_plane(field.levels[l][p], u[p], v[p], factor.data());
            for (int c = 0; c < h; ++c) dst[c] *= factor[c];
        }
    }
    return out;
}

void hexplane_features_backward(const HexPlanes& field, const Vec3& position, double t,
                                const Eigen::VectorXd& grad_features, HexPlanes* grad_field,
                                Vec3* grad_position) {
    const int h = field.config.feature_width;
    require(grad_features.size() == field.feature_dim(),
            "hexplane_features_backward: gradient size mismatch");
    Vec3 ext = field.bounds_max - field.bounds_min;
    Vec3 sraw = ((position - field.bounds_min).array() / ext.array()).matrix();
    Vec3 s = sraw.cwiseMax(0.0).cwiseMin(1.0);
    double tau = std::clamp(t, 0.0, 1.0);
    double u[6], v[6];
    plane_coords(s, tau, u, v);

    std::vector<double> factors(6 * h);
    std::vector<double> dfactor(h);
    // du/dv per plane accumulated over levels, mapped to position at the end.
    double du[6] = {0}, dv[6] = {0};
    for (size_t l = 0; l < field.levels.size(); ++l) {
        for (int p = 0; p < 6; ++p) {
            interpolate_plane(field.levels[l][p], u[p], v[p], factors.data() + p * h);
        }
        const double* g = grad_features.data() + l * h;
        for (int p = 0; p < 6; ++p) {
            // Product rule: gradient of factor p carries the product of the
            // other five factors.
            for (int c = 0; c < h; ++c) {
                double rest = 1.0;
                for (int q = 0; q < 6; ++q) {
                    if (q != p) rest *= factors[q * h + c];
                }
                dfactor[c] = g[c] * rest;
            }
            interpolate_plane_backward(field.levels[l][p], u[p], v[p], dfactor.data(),
                                       grad_field ? &grad_field->levels[l][p] : nullptr, &du[p],
                                       &dv[p]);
        }
    }

    if (grad_position) {
        double ds[3] = {du[kPlaneXY] + du[kPlaneXZ] + du[kPlaneXT],
                        dv[kPlaneXY] + du[kPlaneYZ] + du[kPlaneYT],
                        dv[kPlaneXZ] + dv[kPlaneYZ] + du[kPlaneZT]};
        for (int k = 0; k < 3; ++k) {
            bool interior = sraw[k] > 0.0 && sraw[k] < 1.0;
            if (interior) (*grad_position)[k] += ds[k] / ext[k];
        }
    }
}

}  // namespace fsplat
