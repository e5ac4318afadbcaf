#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fsplat/objective.hpp"
#include "oracles.hpp"

using namespace fsplat;
using fsplat::test::random_image;
using fsplat::test::uniform;

namespace {

HexPlanes tiny_planes(int res = 2, int width = 1) {
    HexPlaneConfig cfg;
    cfg.levels = 1;
    cfg.base_spatial_res = res;
    cfg.base_time_res = res;
    cfg.feature_width = width;
    HexPlanes planes;
    planes.config = cfg;
    planes.levels.resize(1);
    for (int p = 0; p < 6; ++p) planes.levels[0][p].resize(res, res, width, 0.0);
    return planes;
}

}  // namespace

TEST(MaskedL1, HandExample) {
    Image gt(2, 2, 1), rendered(2, 2, 1);
    gt.at(0, 0, 0) = 1.0;
    gt.at(0, 1, 0) = 0.5;
    gt.at(1, 0, 0) = 0.0;
    gt.at(1, 1, 0) = 0.25;
    rendered.at(0, 0, 0) = 0.0;   // |r| = 1.0
    rendered.at(0, 1, 0) = 2.5;   // |r| = 2.0
    rendered.at(1, 0, 0) = 1.0;   // |r| = 1.0
    rendered.at(1, 1, 0) = 0.75;  // |r| = 0.5
    MaskedL1Result r = masked_l1(gt, rendered, Image());
    EXPECT_NEAR(r.loss, 4.5, 1e-12);
    EXPECT_EQ(r.grad_rendered.at(0, 0, 0), -1.0);
    EXPECT_EQ(r.grad_rendered.at(0, 1, 0), 1.0);

    Image mask(2, 2, 1, 0.0);
    mask.at(0, 1, 0) = 1.0;  // exclude the 2.0 residual
    MaskedL1Result masked = masked_l1(gt, rendered, mask);
    EXPECT_NEAR(masked.loss, 2.5, 1e-12);
    EXPECT_EQ(masked.grad_rendered.at(0, 1, 0), 0.0);
}

TEST(MaskedL1, PerfectReconstructionAndFullMaskCostNothing) {
    std::mt19937_64 rng(101);
    Image gt = random_image(rng, 4, 4, 3);
    EXPECT_EQ(masked_l1(gt, gt, Image()).loss, 0.0);

    Image rendered = random_image(rng, 4, 4, 3);
    Image all(4, 4, 1, 1.0);
    MaskedL1Result r = masked_l1(gt, rendered, all);
    EXPECT_EQ(r.loss, 0.0);
    for (size_t i = 0; i < r.grad_rendered.size(); ++i) EXPECT_EQ(r.grad_rendered.raw()[i], 0.0);
}

TEST(DepthHuber, QuadraticInsideLinearOutside) {
    const double delta = 0.2;
    Image gt(1, 2, 1), rendered(1, 2, 1);
    // Pixel 0: residual delta/2, quadratic region. Pixel 1: residual 10 delta.
    gt.at(0, 0, 0) = 1.0;
    rendered.at(0, 0, 0) = 1.0 + delta / 2;
    gt.at(0, 1, 0) = 1.0;
    rendered.at(0, 1, 0) = 1.0 + 10 * delta;
    DepthHuberResult r = depth_huber(gt, rendered, Image(), delta);
    double expected = ((delta / 2) * (delta / 2) / (2 * delta) + (10 * delta - delta / 2)) / 2.0;
    EXPECT_NEAR(r.loss, expected, 1e-12);

    EXPECT_EQ(depth_huber(gt, gt, Image(), delta).loss, 0.0);
}

TEST(DepthHuber, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(103);
    Image gt = random_image(rng, 4, 4, 1);
    Image rendered = random_image(rng, 4, 4, 1);
    Image mask(4, 4, 1, 0.0);
    mask.at(2, 2, 0) = 1.0;
    const double delta = 0.2;
    DepthHuberResult r = depth_huber(gt, rendered, mask, delta);
    const double h = 1e-7;
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            Image rp = rendered, rm = rendered;
            rp.at(y, x, 0) += h;
            rm.at(y, x, 0) -= h;
            double fd = (depth_huber(gt, rp, mask, delta).loss -
                         depth_huber(gt, rm, mask, delta).loss) /
                        (2 * h);
            EXPECT_NEAR(r.grad_rendered.at(y, x, 0), fd, 1e-7);
        }
    }
    EXPECT_EQ(r.grad_rendered.at(2, 2, 0), 0.0);
}

TEST(TvLoss, ConstantPlanesAreFree) {
    HexPlanes planes = tiny_planes(3, 2);
    for (auto& level : planes.levels) {
        for (auto& p : level) std::fill(p.data.begin(), p.data.end(), 0.7);
    }
    EXPECT_EQ(tv_loss(planes, nullptr), 0.0);
}

TEST(TvLoss, HandCountedStep) {
    // One 2x2 plane steps 0 -> 1 along the second axis; the other five stay
    // flat. Each 2x2 plane holds 4 adjacent pairs, so the mean over the
    // 24 pairs of the level is 2 / 24.
    HexPlanes planes = tiny_planes(2, 1);
    PlaneGrid& g = planes.levels[0][kPlaneXY];
    g.node(0, 0)[0] = 0.0;
    g.node(0, 1)[0] = 1.0;
    g.node(1, 0)[0] = 0.0;
    g.node(1, 1)[0] = 1.0;
    EXPECT_NEAR(tv_loss(planes, nullptr), 2.0 / 24.0, 1e-12);
}

TEST(TvLoss, QuadraticInTheStepHeight) {
    HexPlanes planes = tiny_planes(2, 1);
    PlaneGrid& g = planes.levels[0][kPlaneXZ];
    g.node(0, 1)[0] = 1.0;
    g.node(1, 1)[0] = 1.0;
    double base = tv_loss(planes, nullptr);
    g.node(0, 1)[0] = 2.0;
    g.node(1, 1)[0] = 2.0;
    EXPECT_NEAR(tv_loss(planes, nullptr), 4.0 * base, 1e-12);
}

TEST(TvLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(105);
    HexPlanes planes = tiny_planes(3, 2);
    for (auto& level : planes.levels) {
        for (auto& p : level) {
            for (double& x : p.data) x = uniform(rng, -1.0, 1.0);
        }
    }
    HexPlanes grad;
    grad.zero_like(planes);
    tv_loss(planes, &grad);
    const double h = 1e-6;
    for (int p = 0; p < 6; ++p) {
        for (size_t k = 0; k < planes.levels[0][p].data.size(); ++k) {
            HexPlanes pp = planes, pm = planes;
            pp.levels[0][p].data[k] += h;
            pm.levels[0][p].data[k] -= h;
            double fd = (tv_loss(pp, nullptr) - tv_loss(pm, nullptr)) / (2 * h);
            EXPECT_NEAR(grad.levels[0][p].data[k], fd, 1e-8) << "plane " << p << " node " << k;
        }
    }
}

TEST(TotalLoss, DefaultWeightsAreTheContractValues) {
    LossWeights w;
    EXPECT_EQ(w.lambda_d, 0.5);
    EXPECT_EQ(w.lambda_tv, 0.1);
    EXPECT_EQ(w.lambda_shf, 1.0);
    EXPECT_EQ(w.lambda_thf, 10.0);
    EXPECT_EQ(w.lambda_s, 0.0);
    EXPECT_EQ(kInertLambdaSurfaceDefault, 0.2);
}

TEST(TotalLoss, OnlyL1ReducesToMaskedL1) {
    std::mt19937_64 rng(107);
    Image gt = random_image(rng, 8, 8, 3);
    Image rendered = random_image(rng, 8, 8, 3);
    ObjectiveOptions options;
    options.weights.lambda_d = 0.0;
    options.weights.lambda_tv = 0.0;
    options.weights.lambda_shf = 0.0;
    options.weights.lambda_thf = 0.0;
    options.enable_depth = false;
    options.enable_thf = false;
    options.enable_tv = false;

    ObjectiveResult r = total_loss(gt, Image(), Image(), rendered, Image(8, 8, 1), Image(8, 8, 1),
                                   nullptr, nullptr, ThfFrameInputs{}, options);
    MaskedL1Result l1 = masked_l1(gt, rendered, Image());
    EXPECT_EQ(r.report.l1, l1.loss);
    EXPECT_EQ(r.report.total, l1.loss);
    EXPECT_EQ(r.report.depth, 0.0);
    EXPECT_EQ(r.report.shf, 0.0);
    EXPECT_EQ(r.report.thf, 0.0);
    EXPECT_EQ(r.report.tv, 0.0);
    EXPECT_EQ(max_abs_diff(r.grad_image, l1.grad_rendered), 0.0);
    // Depth disabled: no gradient reaches the depth or alpha channels.
    for (size_t i = 0; i < r.grad_depth.size(); ++i) EXPECT_EQ(r.grad_depth.raw()[i], 0.0);
    for (size_t i = 0; i < r.grad_alpha.size(); ++i) EXPECT_EQ(r.grad_alpha.raw()[i], 0.0);
}

TEST(TotalLoss, ZeroWeightContributesExactlyNothing) {
    std::mt19937_64 rng(109);
    Image gt = random_image(rng, 8, 8, 3);
    Image rendered = random_image(rng, 8, 8, 3);

    ObjectiveOptions base;
    base.enable_depth = false;
    base.enable_thf = false;
    base.enable_tv = false;
    base.weights.lambda_d = 0.0;
    base.weights.lambda_tv = 0.0;
    base.weights.lambda_thf = 0.0;
    base.weights.lambda_shf = 1.0;

    ObjectiveOptions zeroed = base;
    zeroed.weights.lambda_shf = 0.0;

    ObjectiveResult with_shf = total_loss(gt, Image(), Image(), rendered, Image(8, 8, 1),
                                          Image(8, 8, 1), nullptr, nullptr, ThfFrameInputs{}, base);
    ObjectiveResult without = total_loss(gt, Image(), Image(), rendered, Image(8, 8, 1),
                                         Image(8, 8, 1), nullptr, nullptr, ThfFrameInputs{},
                                         zeroed);
    EXPECT_GT(with_shf.report.shf, 0.0);
    EXPECT_EQ(without.report.shf, 0.0);
    EXPECT_EQ(without.report.total, without.report.l1);
    EXPECT_EQ(max_abs_diff(without.grad_image, masked_l1(gt, rendered, Image()).grad_rendered),
              0.0);
}

TEST(TotalLoss, TermsSuperposeLinearly) {
    std::mt19937_64 rng(111);
    Image gt = random_image(rng, 8, 8, 3);
    Image rendered = random_image(rng, 8, 8, 3);
    Image gt_depth = random_image(rng, 8, 8, 1, 0.5, 2.0);
    Image rendered_depth = random_image(rng, 8, 8, 1, 0.5, 2.0);
    Image alpha(8, 8, 1, 0.9);
    HexPlanes planes = tiny_planes(2, 1);
    std::mt19937_64 prng(113);
    for (auto& level : planes.levels) {
        for (auto& p : level) {
            for (double& x : p.data) x = uniform(prng, -1.0, 1.0);
        }
    }

    ObjectiveOptions options;
    options.enable_thf = false;
    options.depth_p95 = 1.7;

    ObjectiveResult r = total_loss(gt, gt_depth, Image(), rendered, rendered_depth, alpha, nullptr,
                                   &planes, ThfFrameInputs{}, options);

    // Each reported term is computed independently below.
    MaskedL1Result l1 = masked_l1(gt, rendered, Image());
    EXPECT_NEAR(r.report.l1, l1.loss, 1e-12);

    // The gt operand is alpha-premultiplied, both operands scaled by p95.
    Image gt_scaled(8, 8, 1), rd_scaled(8, 8, 1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            gt_scaled.at(y, x, 0) = gt_depth.at(y, x, 0) * alpha.at(y, x, 0) / options.depth_p95;
            rd_scaled.at(y, x, 0) = rendered_depth.at(y, x, 0) / options.depth_p95;
        }
    }
    DepthHuberResult dh = depth_huber(gt_scaled, rd_scaled, Image(), options.depth_delta);
    EXPECT_NEAR(r.report.depth, dh.loss, 1e-12);

    ShfResult shf = shf_loss(gt, rendered, options.shf_radius_ratio);
    EXPECT_NEAR(r.report.shf, shf.loss, 1e-12);

    double tv = tv_loss(planes, nullptr);
    EXPECT_NEAR(r.report.tv, tv, 1e-12);

    double expected_total = l1.loss + options.weights.lambda_d * dh.loss +
                            options.weights.lambda_shf * shf.loss +
                            options.weights.lambda_tv * tv;
    EXPECT_NEAR(r.report.total, expected_total, 1e-9);

    // Image gradient superposes the weighted per-term gradients.
    for (size_t i = 0; i < r.grad_image.size(); ++i) {
        double expected = l1.grad_rendered.raw()[i] +
                          options.weights.lambda_shf * shf.grad_rendered.raw()[i];
        EXPECT_NEAR(r.grad_image.raw()[i], expected, 1e-12);
    }
    EXPECT_TRUE(r.has_tv);
}

TEST(TotalLoss, LowAlphaPixelsSkipDepthSupervision) {
    Image gt(4, 4, 3, 0.5);
    Image rendered(4, 4, 3, 0.5);
    Image gt_depth(4, 4, 1, 1.0);
    Image rendered_depth(4, 4, 1, 5.0);  // large depth error everywhere
    Image alpha(4, 4, 1, 0.1);           // below depth_alpha_min

    ObjectiveOptions options;
    options.enable_thf = false;
    options.enable_tv = false;
    ObjectiveResult r = total_loss(gt, gt_depth, Image(), rendered, rendered_depth, alpha, nullptr,
                                   nullptr, ThfFrameInputs{}, options);
    EXPECT_EQ(r.report.depth, 0.0);
    for (size_t i = 0; i < r.grad_depth.size(); ++i) EXPECT_EQ(r.grad_depth.raw()[i], 0.0);
}
