#pragma once

#include <array>
#include <vector>

#include "fsplat/types.hpp"

namespace fsplat {

// One 2D feature grid. Nodes are laid out row-major over (i, j) with the
// feature channel fastest: data[(i * n2 + j) * width + c].
struct PlaneGrid {
    int n1 = 0, n2 = 0, width = 0;
    std::vector<double> data;

    void resize(int n1_, int n2_, int width_, double fill = 0.0) {
        n1 = n1_;
        n2 = n2_;
        width = width_;
        data.assign(static_cast<size_t>(n1) * n2 * width, fill);
    }
    double* node(int i, int j) { return data.data() + (static_cast<size_t>(i) * n2 + j) * width; }
    const double* node(int i, int j) const {
        return data.data() + (static_cast<size_t>(i) * n2 + j) * width;
    }
};

// Bilinear blend of the four grid nodes around (u, v) in [0,1]^2; u spans the
// n1 axis. Inputs are clamped. out must hold width doubles.
void interpolate_plane(const PlaneGrid& plane, double u, double v, double* out);

// Accumulates the corner weights into grad_plane (same shape as plane) and
// the chain through (u, v) into du/dv. Clamped queries get zero coordinate
// gradient. Any output pointer may be null.
void interpolate_plane_backward(const PlaneGrid& plane, double u, double v, const double* grad_out,
                                PlaneGrid* grad_plane, double* du, double* dv);

// Plane order within a level. The first axis of each pair maps to u.
enum PlaneIndex { kPlaneXY = 0, kPlaneXZ, kPlaneYZ, kPlaneXT, kPlaneYT, kPlaneZT };

struct HexPlaneConfig {
    int levels = 2;
    int base_spatial_res = 32;
    int base_time_res = 16;
    int level_scale = 2;       // resolution multiplier per level
    int feature_width = 16;    // h
    double init_scale = 1e-2;  // uniform range for spatial plane features
    void validate() const;
    int spatial_res(int level) const;
    int time_res(int level) const;
};

struct HexPlanes {
    HexPlaneConfig config;
    Vec3 bounds_min = Vec3::Zero();
    Vec3 bounds_max = Vec3::Ones();
    std::vector<std::array<PlaneGrid, 6>> levels;

    int feature_dim() const { return config.levels * config.feature_width; }
    // Spatial planes start from small uniform noise, temporal planes from
    // ones so the initial product tracks the spatial-only signal.
    void init(const HexPlaneConfig& cfg, const Vec3& bmin, const Vec3& bmax, uint64_t seed);
    void zero_like(const HexPlanes& other);
    size_t parameter_count() const;
};

// Per level, the elementwise product of the six bilinear lookups; levels
// concatenated ascending. t and the normalized position are clamped to [0,1].
Eigen::VectorXd hexplane_features(const HexPlanes& field, const Vec3& position, double t);

// grad_field must be shaped like field (zero_like). grad_position picks up
// the dependence of the lookup coordinates on the query point.
void hexplane_features_backward(const HexPlanes& field, const Vec3& position, double t,
                                const Eigen::VectorXd& grad_features, HexPlanes* grad_field,
                                Vec3* grad_position);

}  // namespace fsplat
