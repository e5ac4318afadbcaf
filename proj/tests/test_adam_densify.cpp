#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fsplat/adam.hpp"
#include "fsplat/densify.hpp"
#include "oracles.hpp"

using namespace fsplat;
using fsplat::test::uniform;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

GaussianCloud small_cloud(size_t n) {
    GaussianCloud cloud;
    cloud.resize(n);
    for (size_t i = 0; i < n; ++i) {
        cloud.positions[i] = Vec3(0.1 * i, 0.2, 1.0 + 0.1 * i);
        cloud.log_scales[i] = Vec3::Constant(std::log(0.005));  // below split threshold
        cloud.opacity_logits[i] = logit(0.5);
        cloud.sh_ptr(i)[0] = 0.3 + 0.01 * i;
    }
    return cloud;
}

DensifyStats stats_with_grad(size_t n, const std::vector<double>& grads) {
    DensifyStats stats;
    stats.resize(n);
    std::vector<uint8_t> visible(n, 1);
    stats.accumulate(grads, visible);
    return stats;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    double params[3] = {1.0, -2.0, 0.5};
    double grads[3] = {0.0, 0.0, 0.0};
    double m[3] = {0.0}, v[3] = {0.0};
    EXPECT_TRUE(adam_step(params, grads, m, v, 3, 0.1, 1));
    EXPECT_EQ(params[0], 1.0);
    EXPECT_EQ(params[1], -2.0);
    EXPECT_EQ(params[2], 0.5);
}

TEST(Adam, FirstStepMovesByTheLearningRate) {
    // With bias correction the first update is lr * g / (|g| + eps), so the
    // step size is essentially lr regardless of the gradient magnitude.
    double params[2] = {0.0, 0.0};
    double grads[2] = {3.0, -0.004};
    double m[2] = {0.0}, v[2] = {0.0};
    EXPECT_TRUE(adam_step(params, grads, m, v, 2, 0.01, 1));
    EXPECT_NEAR(params[0], -0.01, 1e-8);
    EXPECT_NEAR(params[1], 0.01, 1e-6);
}

TEST(Adam, MatchesAHandRolledScalarReference) {
    const double lr = 0.05;
    AdamOptions opts;
    double param = 0.7, m = 0.0, v = 0.0;
    double ref_param = 0.7, ref_m = 0.0, ref_v = 0.0;
    const double gseq[4] = {0.3, -1.1, 0.8, 0.05};
    for (int step = 1; step <= 4; ++step) {
        double g = gseq[step - 1];
        ASSERT_TRUE(adam_step(&param, &g, &m, &v, 1, lr, step, opts));

        ref_m = opts.beta1 * ref_m + (1 - opts.beta1) * g;
        ref_v = opts.beta2 * ref_v + (1 - opts.beta2) * g * g;
        double mhat = ref_m / (1 - std::pow(opts.beta1, step));
        double vhat = ref_v / (1 - std::pow(opts.beta2, step));
        ref_param -= lr * mhat / (std::sqrt(vhat) + opts.eps);
        EXPECT_NEAR(param, ref_param, 1e-14) << "step " << step;
        EXPECT_NEAR(m, ref_m, 1e-14);
        EXPECT_NEAR(v, ref_v, 1e-14);
    }
}

TEST(Adam, NonFiniteGradientSkipsTheWholeGroup) {
    double params[3] = {1.0, 2.0, 3.0};
    double grads[3] = {0.5, std::numeric_limits<double>::quiet_NaN(), 0.2};
    double m[3] = {0.1, 0.1, 0.1}, v[3] = {0.2, 0.2, 0.2};
    EXPECT_FALSE(adam_step(params, grads, m, v, 3, 0.1, 5));
    EXPECT_EQ(params[0], 1.0);
    EXPECT_EQ(params[2], 3.0);
    EXPECT_EQ(m[0], 0.1);
    EXPECT_EQ(v[0], 0.2);

    grads[1] = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(adam_step(params, grads, m, v, 3, 0.1, 5));
    EXPECT_EQ(params[1], 2.0);
}

TEST(ExpLr, GeometricScheduleWithClampedEnds) {
    const double lr0 = 1.6e-4, lr1 = 1.6e-6;
    EXPECT_EQ(exp_lr(lr0, lr1, 0, 1000), lr0);
    EXPECT_EQ(exp_lr(lr0, lr1, 1000, 1000), lr1);
    EXPECT_NEAR(exp_lr(lr0, lr1, 500, 1000), std::sqrt(lr0 * lr1), 1e-12);
    // Clamped outside the schedule.
    EXPECT_EQ(exp_lr(lr0, lr1, -5, 1000), lr0);
    EXPECT_EQ(exp_lr(lr0, lr1, 2000, 1000), lr1);
    // Consecutive steps keep a constant ratio.
    double r1 = exp_lr(lr0, lr1, 101, 1000) / exp_lr(lr0, lr1, 100, 1000);
    double r2 = exp_lr(lr0, lr1, 501, 1000) / exp_lr(lr0, lr1, 500, 1000);
    EXPECT_NEAR(r1, r2, 1e-12);
}

TEST(Densify, QuietCloudIsLeftAlone) {
    GaussianCloud cloud = small_cloud(4);
    DensifyStats stats = stats_with_grad(4, std::vector<double>(4, 1e-6));
    CloudMoments moments;
    moments.resize_like(cloud);
    std::mt19937_64 rng(7);
    DensifyReport report = densify_and_prune(cloud, stats, moments, DensifyConfig{}, rng);
    EXPECT_EQ(report.cloned, 0u);
    EXPECT_EQ(report.split, 0u);
    EXPECT_EQ(report.pruned, 0u);
    EXPECT_EQ(cloud.size(), 4u);
}

TEST(Densify, SmallHighGradientGaussianIsCloned) {
    GaussianCloud cloud = small_cloud(3);
    std::vector<double> grads = {1e-6, 5e-3, 1e-6};  // only index 1 trips
    DensifyStats stats = stats_with_grad(3, grads);
    CloudMoments moments;
    moments.resize_like(cloud);
    moments.m.positions[1] = Vec3(9.0, 9.0, 9.0);  // moments of the source
    std::mt19937_64 rng(11);
    DensifyReport report = densify_and_prune(cloud, stats, moments, DensifyConfig{}, rng);
    EXPECT_EQ(report.cloned, 1u);
    EXPECT_EQ(report.split, 0u);
    EXPECT_EQ(report.pruned, 0u);
    ASSERT_EQ(cloud.size(), 4u);
    // The clone copies the source parameters exactly.
    EXPECT_EQ(cloud.positions[3], cloud.positions[1]);
    EXPECT_EQ(cloud.log_scales[3], cloud.log_scales[1]);
    EXPECT_EQ(cloud.opacity_logits[3], cloud.opacity_logits[1]);
    EXPECT_EQ(cloud.sh_ptr(3)[0], cloud.sh_ptr(1)[0]);
    // New rows start with zero moments; the source keeps its own.
    ASSERT_EQ(moments.m.positions.size(), 4u);
    EXPECT_EQ(moments.m.positions[3], Vec3::Zero());
    EXPECT_EQ(moments.m.positions[1], Vec3(9.0, 9.0, 9.0));
    // Stats were reset for the new population.
    EXPECT_EQ(stats.grad_accum.size(), 4u);
    EXPECT_EQ(stats.grad_accum[0], 0.0);
    EXPECT_EQ(stats.visible_count[0], 0);
}

TEST(Densify, LargeHighGradientGaussianIsSplit) {
    GaussianCloud cloud = small_cloud(2);
    DensifyConfig config;
    cloud.log_scales[0] = Vec3::Constant(std::log(config.scale_split_threshold * 5));
    Vec3 source_position = cloud.positions[0];
    Vec3 source_log_scale = cloud.log_scales[0];
    DensifyStats stats = stats_with_grad(2, {5e-3, 1e-6});
    CloudMoments moments;
    moments.resize_like(cloud);
    std::mt19937_64 rng(13);
    DensifyReport report = densify_and_prune(cloud, stats, moments, config, rng);
    EXPECT_EQ(report.split, 1u);
    EXPECT_EQ(report.cloned, 0u);
    // The source row is replaced by two samples: net one extra gaussian.
    ASSERT_EQ(cloud.size(), 3u);
    Vec3 expected_scale = source_log_scale - Vec3::Constant(std::log(config.split_scale_factor));
    int found = 0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        if ((cloud.log_scales[i] - expected_scale).norm() < 1e-12) {
            ++found;
            // Samples land near the source, not on top of it.
            EXPECT_LT((cloud.positions[i] - source_position).norm(), 1.0);
        }
    }
    EXPECT_EQ(found, 2);
    EXPECT_EQ(moments.m.positions.size(), cloud.size());
}

TEST(Densify, TransparentGaussiansArePruned) {
    GaussianCloud cloud = small_cloud(3);
    cloud.opacity_logits[1] = logit(1e-4);  // below the 0.005 prune threshold
    double kept_sh[2] = {cloud.sh_ptr(0)[0], cloud.sh_ptr(2)[0]};
    DensifyStats stats = stats_with_grad(3, std::vector<double>(3, 1e-6));
    CloudMoments moments;
    moments.resize_like(cloud);
    std::mt19937_64 rng(17);
    DensifyReport report = densify_and_prune(cloud, stats, moments, DensifyConfig{}, rng);
    EXPECT_EQ(report.pruned, 1u);
    ASSERT_EQ(cloud.size(), 2u);
    EXPECT_EQ(cloud.sh_ptr(0)[0], kept_sh[0]);
    EXPECT_EQ(cloud.sh_ptr(1)[0], kept_sh[1]);
    EXPECT_EQ(moments.m.positions.size(), 2u);
    EXPECT_EQ(stats.grad_accum.size(), 2u);
}

TEST(Densify, GrowthStopsAtTheCap) {
    GaussianCloud cloud = small_cloud(4);
    DensifyConfig config;
    config.max_gaussians = 5;
    DensifyStats stats = stats_with_grad(4, std::vector<double>(4, 5e-3));  // all want to clone
    CloudMoments moments;
    moments.resize_like(cloud);
    std::mt19937_64 rng(19);
    DensifyReport report = densify_and_prune(cloud, stats, moments, config, rng);
    EXPECT_LE(cloud.size(), 5u);
    EXPECT_EQ(report.cloned + report.split, 1u);
}

TEST(Densify, SameSeedGivesTheSameOutcome) {
    DensifyConfig config;
    auto run = [&config]() {
        GaussianCloud cloud = small_cloud(4);
        cloud.log_scales[2] = Vec3::Constant(std::log(config.scale_split_threshold * 3));
        DensifyStats stats = stats_with_grad(4, {5e-3, 1e-6, 7e-3, 1e-6});
        CloudMoments moments;
        moments.resize_like(cloud);
        std::mt19937_64 rng(23);
        densify_and_prune(cloud, stats, moments, config, rng);
        return cloud;
    };
    GaussianCloud a = run();
    GaussianCloud b = run();
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.positions[i], b.positions[i]);
        EXPECT_EQ(a.log_scales[i], b.log_scales[i]);
    }
    EXPECT_EQ(a.sh_coeffs, b.sh_coeffs);
}

TEST(Densify, InvisibleGaussiansDoNotAccumulateGradientSignal) {
    DensifyStats stats;
    stats.resize(2);
    std::vector<double> grads = {1.0, 1.0};
    std::vector<uint8_t> visible = {1, 0};
    stats.accumulate(grads, visible);
    stats.accumulate(grads, visible);
    EXPECT_EQ(stats.grad_accum[0], 2.0);
    EXPECT_EQ(stats.visible_count[0], 2);
    EXPECT_EQ(stats.grad_accum[1], 0.0);
    EXPECT_EQ(stats.visible_count[1], 0);
}
