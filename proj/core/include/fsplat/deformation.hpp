#pragma once

#include <vector>

#include "fsplat/gaussian_cloud.hpp"
#include "fsplat/hexplane.hpp"
#include "fsplat/mlp.hpp"

namespace fsplat {

// Time-conditioned deformation field: multi-resolution plane features fused
// by elementwise products, decoded by a single MLP into per-gaussian deltas
// on every parameter group.
struct DeformField {
    HexPlanes planes;
    DeformMlp mlp;
    int sh_dims = 3;  // width of the sh head, 3 * coeffs_per_channel

    void init(const HexPlaneConfig& cfg, int mlp_hidden, int mlp_layers, const Vec3& bounds_min,
              const Vec3& bounds_max, int sh_dims_, uint64_t seed);
    void zero_like(const DeformField& other);
    size_t parameter_count() const;
};

struct DeformContext {
    double t = 0.0;
    size_t count = 0;
    std::vector<Eigen::VectorXd> features;
    std::vector<std::vector<Eigen::VectorXd>> hidden;
};

// Applies the decoded deltas in the unconstrained coordinates:
//   position + dpos, log_scale + dls, rotation + drot, sh + dsh, logit + dop.
// The rotation sum is stored unnormalized; covariance construction normalizes
// it, so a zero delta reproduces the static render bit for bit. ctx may be
// null when no backward pass will follow.
GaussianCloud deform_cloud(const GaussianCloud& cloud, double t, const DeformField& field,
                           DeformContext* ctx, int threads = 1);

// Maps gradients with respect to the deformed cloud back onto the static
// cloud and the field. Additive application makes the cloud part a
// passthrough plus the chain through the feature lookup coordinates.
void deform_cloud_backward(const GaussianCloud& cloud, const DeformField& field,
                           const DeformContext& ctx, const CloudGrads& grad_deformed,
                           CloudGrads* grad_cloud, DeformField* grad_field, int threads = 1);

}  // namespace fsplat
