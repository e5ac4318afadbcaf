#include "fsplat/densify.hpp"

#include <cmath>

#include "fsplat/covariance.hpp"
#include "fsplat/errors.hpp"

namespace fsplat {

void DensifyStats::resize(size_t n) {
    grad_accum.assign(n, 0.0);
    visible_count.assign(n, 0);
}

void DensifyStats::reset() {
    std::fill(grad_accum.begin(), grad_accum.end(), 0.0);
    std::fill(visible_count.begin(), visible_count.end(), 0);
}

void DensifyStats::accumulate(const std::vector<double>& screen_grad_norm,
                              const std::vector<uint8_t>& visible) {
    require(screen_grad_norm.size() == grad_accum.size() && visible.size() == grad_accum.size(),
            "DensifyStats::accumulate: size mismatch");
    for (size_t i = 0; i < grad_accum.size(); ++i) {
        if (visible[i]) {
            grad_accum[i] += screen_grad_norm[i];
            visible_count[i] += 1;
        }
    }
}

void CloudMoments::resize_like(const GaussianCloud& cloud) {
    m.resize_like(cloud);
    v.resize_like(cloud);
}

namespace {

// Uniform in [0, 1) with the full 53-bit mantissa, consuming exactly one
// engine draw. Keeps the stream reproducible across standard libraries.
double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

void normal_pair(std::mt19937_64& rng, double* z0, double* z1) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    *z0 = r * std::cos(2.0 * M_PI * u2);
    *z1 = r * std::sin(2.0 * M_PI * u2);
}

Vec3 sample_standard_normal(std::mt19937_64& rng) {
    double z0, z1, z2, z3;
    normal_pair(rng, &z0, &z1);
    normal_pair(rng, &z2, &z3);
    return Vec3(z0, z1, z2);
}

void append_zero_rows(CloudGrads& g, size_t rows, int sh_stride) {
    g.positions.resize(g.positions.size() + rows, Vec3::Zero());
    g.rotations.resize(g.rotations.size() + rows, Vec4::Zero());
    g.log_scales.resize(g.log_scales.size() + rows, Vec3::Zero());
    g.opacity_logits.resize(g.opacity_logits.size() + rows, 0.0);
    g.sh_coeffs.resize(g.sh_coeffs.size() + rows * sh_stride, 0.0);
}

void filter_rows(CloudGrads& g, const std::vector<uint8_t>& keep, int sh_stride) {
    size_t out = 0;
    for (size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        g.positions[out] = g.positions[i];
        g.rotations[out] = g.rotations[i];
        g.log_scales[out] = g.log_scales[i];
        g.opacity_logits[out] = g.opacity_logits[i];
        for (int c = 0; c < sh_stride; ++c) {
            g.sh_coeffs[out * sh_stride + c] = g.sh_coeffs[i * sh_stride + c];
        }
        ++out;
    }
    g.positions.resize(out);
    g.rotations.resize(out);
    g.log_scales.resize(out);
    g.opacity_logits.resize(out);
    g.sh_coeffs.resize(out * sh_stride);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

DensifyReport densify_and_prune(GaussianCloud& cloud, DensifyStats& stats, CloudMoments& moments,
                                const DensifyConfig& config, std::mt19937_64& rng) {
    const size_t n = cloud.size();
    require(stats.grad_accum.size() == n, "densify_and_prune: stats size mismatch");
    require(moments.m.positions.size() == n && moments.v.positions.size() == n,
            "densify_and_prune: moment size mismatch");
    const int sh_stride = cloud.sh_stride();

    std::vector<double> mean_grad(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        if (stats.visible_count[i] > 0) mean_grad[i] = stats.grad_accum[i] / stats.visible_count[i];
    }

    DensifyReport report;
    std::vector<uint8_t> keep(n, 1);
    size_t total = n;

    // Clone pass: small candidates duplicated in place.
    for (size_t i = 0; i < n; ++i) {
        if (mean_grad[i] < config.grad_threshold) continue;
        double max_scale = std::exp(cloud.log_scales[i].maxCoeff());
        if (max_scale >= config.scale_split_threshold) continue;
        if (total + 1 > config.max_gaussians) break;
        cloud.append_from(cloud, i);
        append_zero_rows(moments.m, 1, sh_stride);
        append_zero_rows(moments.v, 1, sh_stride);
        keep.push_back(1);
        ++total;
        ++report.cloned;
    }

    // Split pass: large candidates replaced by two draws from their own
    // density with shrunken scales. Net +1 per split.
    const double log_shrink = std::log(config.split_scale_factor);
    for (size_t i = 0; i < n; ++i) {
        if (mean_grad[i] < config.grad_threshold) continue;
        double max_scale = std::exp(cloud.log_scales[i].maxCoeff());
        if (max_scale < config.scale_split_threshold) continue;
        if (total + 1 > config.max_gaussians) break;
        CovarianceContext ctx;
        build_covariance(cloud.rotations[i], cloud.log_scales[i], &ctx);
        for (int s = 0; s < 2; ++s) {
            Vec3 z = sample_standard_normal(rng);
            Vec3 scaled(std::exp(cloud.log_scales[i][0]) * z[0],
                        std::exp(cloud.log_scales[i][1]) * z[1],
                        std::exp(cloud.log_scales[i][2]) * z[2]);
            size_t row = cloud.size();
            cloud.append_from(cloud, i);
            cloud.positions[row] = cloud.positions[i] + ctx.R * scaled;
            cloud.log_scales[row] = cloud.log_scales[i].array() - log_shrink;
            append_zero_rows(moments.m, 1, sh_stride);
            append_zero_rows(moments.v, 1, sh_stride);
            keep.push_back(1);
        }
        keep[i] = 0;
        ++total;
        ++report.split;
    }

    for (size_t i = 0; i < cloud.size(); ++i) {
        if (keep[i] && sigmoid(cloud.opacity_logits[i]) < config.opacity_prune_threshold) {
            keep[i] = 0;
            ++report.pruned;
        }
    }

    cloud.filter(keep);
    filter_rows(moments.m, keep, sh_stride);
    filter_rows(moments.v, keep, sh_stride);
    stats.resize(cloud.size());
    return report;
}

}  // namespace fsplat
