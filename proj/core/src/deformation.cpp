#include "fsplat/deformation.hpp"

#include <cmath>
#include <string>

#include "fsplat/errors.hpp"
#include "fsplat/parallel.hpp"

namespace fsplat {

void DeformField::init(const HexPlaneConfig& cfg, int mlp_hidden, int mlp_layers,
                       const Vec3& bounds_min, const Vec3& bounds_max, int sh_dims_,
                       uint64_t seed) {
    sh_dims = sh_dims_;
    planes.init(cfg, bounds_min, bounds_max, seed);
    mlp.init(planes.feature_dim(), mlp_hidden, mlp_layers, sh_dims, seed + 1);
}

void DeformField::zero_like(const DeformField& other) {
    sh_dims = other.sh_dims;
    planes.zero_like(other.planes);
    mlp.zero_like(other.mlp);
}

size_t DeformField::parameter_count() const {
    return planes.parameter_count() + mlp.parameter_count();
}

GaussianCloud deform_cloud(const GaussianCloud& cloud, double t, const DeformField& field,
                           DeformContext* ctx, int threads) {
    cloud.check_consistent();
    require(field.sh_dims == cloud.sh_stride(), "deform_cloud: field sh head does not match cloud");
    GaussianCloud out = cloud;
    if (ctx) {
        ctx->t = t;
        ctx->count = cloud.size();
        ctx->features.resize(cloud.size());
        ctx->hidden.resize(cloud.size());
    }
    std::vector<int> bad(cloud.size(), -1);
    parallel_for(cloud.size(), threads, [&](size_t begin, size_t end) {
        std::vector<Eigen::VectorXd> local_hidden;
        for (size_t i = begin; i < end; ++i) {
            Eigen::VectorXd feat = hexplane_features(field.planes, cloud.positions[i], t);
            std::vector<Eigen::VectorXd>* hid = ctx ? &ctx->hidden[i] : &local_hidden;
            DeformDelta d = field.mlp.forward(feat, hid);
            if (!d.position.allFinite() || !d.log_scale.allFinite() || !d.rotation.allFinite() ||
                !d.sh.allFinite() || !std::isfinite(d.opacity_logit)) {
                bad[i] = static_cast<int>(i);
                continue;
            }
            out.positions[i] += d.position;
            out.log_scales[i] += d.log_scale;
            out.rotations[i] += d.rotation;
            out.opacity_logits[i] += d.opacity_logit;
            double* sh = out.sh_ptr(i);
            for (int k = 0; k < cloud.sh_stride(); ++k) sh[k] += d.sh[k];
            if (ctx) ctx->features[i] = std::move(feat);
        }
    });
    for (size_t i = 0; i < bad.size(); ++i) {
        if (bad[i] >= 0) {
            throw NumericError("deform_cloud: non-finite deformation at gaussian index " +
                               std::to_string(i));
        }
    }
    return out;
}

void deform_cloud_backward(const GaussianCloud& cloud, const DeformField& field,
                           const DeformContext& ctx, const CloudGrads& grad_deformed,
                           CloudGrads* grad_cloud, DeformField* grad_field, int threads) {
    require(ctx.count == cloud.size(), "deform_cloud_backward: context does not match cloud");
    require(grad_deformed.positions.size() == cloud.size(),
            "deform_cloud_backward: gradient size mismatch");
    const int sh_stride = cloud.sh_stride();

    int nblocks = parallel_blocks(cloud.size(), threads);
    std::vector<DeformField> block_fields(std::max(nblocks, 1));
    std::vector<CloudGrads> block_pos(std::max(nblocks, 1));
    for (int b = 0; b < std::max(nblocks, 1); ++b) {
        if (grad_field) block_fields[b].zero_like(field);
        block_pos[b].resize_like(cloud);
    }

    parallel_for_blocks(cloud.size(), threads, [&](int block, size_t begin, size_t end) {
        DeformField* gf = grad_field ? &block_fields[block] : nullptr;
        for (size_t i = begin; i < end; ++i) {
            DeformDelta gd;
            gd.position = grad_deformed.positions[i];
            gd.log_scale = grad_deformed.log_scales[i];
            gd.rotation = grad_deformed.rotations[i];
            gd.sh = Eigen::Map<const Eigen::VectorXd>(grad_deformed.sh_coeffs.data() + i * sh_stride,
                                                      sh_stride);
            gd.opacity_logit = grad_deformed.opacity_logits[i];
            Eigen::VectorXd dfeat =
                field.mlp.backward(ctx.features[i], ctx.hidden[i], gd, gf ? &gf->mlp : nullptr);
            Vec3 dpos_via_coords = Vec3::Zero();
            hexplane_features_backward(field.planes, cloud.positions[i], ctx.t, dfeat,
                                       gf ? &gf->planes : nullptr, &dpos_via_coords);
            block_pos[block].positions[i] = dpos_via_coords;
        }
    });

    if (grad_cloud) {
        grad_cloud->accumulate(grad_deformed);
        for (int b = 0; b < nblocks; ++b) {
            for (size_t i = 0; i < cloud.size(); ++i) {
                grad_cloud->positions[i] += block_pos[b].positions[i];
            }
        }
    }
    if (grad_field) {
        for (int b = 0; b < nblocks; ++b) {
            const DeformField& gf = block_fields[b];
            for (size_t l = 0; l < field.planes.levels.size(); ++l) {
                for (int p = 0; p < 6; ++p) {
                    auto& dst = grad_field->planes.levels[l][p].data;
                    const auto& src = gf.planes.levels[l][p].data;
                    for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
                }
            }
            auto add_linear = [](Linear& dst, const Linear& src) {
                for (size_t k = 0; k < dst.w.size(); ++k) dst.w[k] += src.w[k];
                for (size_t k = 0; k < dst.b.size(); ++k) dst.b[k] += src.b[k];
            };
            for (size_t l = 0; l < field.mlp.trunk.size(); ++l) {
                add_linear(grad_field->mlp.trunk[l], gf.mlp.trunk[l]);
            }
            add_linear(grad_field->mlp.head_position, gf.mlp.head_position);
            add_linear(grad_field->mlp.head_log_scale, gf.mlp.head_log_scale);
            add_linear(grad_field->mlp.head_rotation, gf.mlp.head_rotation);
            add_linear(grad_field->mlp.head_sh, gf.mlp.head_sh);
            add_linear(grad_field->mlp.head_opacity, gf.mlp.head_opacity);
        }
    }
}

}  // namespace fsplat
