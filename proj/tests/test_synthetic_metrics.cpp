#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fsplat/errors.hpp"
#include "fsplat/image.hpp"
#include "fsplat/lucas_kanade.hpp"
#include "fsplat/metrics.hpp"
#include "fsplat/synthetic.hpp"

namespace fsplat {
namespace {

Image random_image(std::mt19937_64& rng, int h, int w, int c) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Image img(h, w, c);
    for (double& v : img.raw()) v = dist(rng);
    return img;
}

// Windowed SSIM recomputed from raw weighted moments instead of centered
// sums, as an independent check of the shipped implementation.
double ssim_oracle(const Image& a, const Image& b) {
    constexpr int kWin = 11;
    constexpr double kC1 = 1e-4;
    constexpr double kC2 = 9e-4;
    std::vector<double> w(kWin * kWin);
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            double di = i - 5, dj = j - 5;
            w[i * kWin + j] = std::exp(-(di * di + dj * dj) / 4.5);
            wsum += w[i * kWin + j];
        }
    }
    for (double& v : w) v /= wsum;

    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double acc = 0.0;
        int count = 0;
        for (int y = 0; y + kWin <= a.height(); ++y) {
            for (int x = 0; x + kWin <= a.width(); ++x) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        double wa = a.at(y + i, x + j, c);
                        double wb = b.at(y + i, x + j, c);
                        double wt = w[i * kWin + j];
                        ma += wt * wa;
                        mb += wt * wb;
                        maa += wt * wa * wa;
                        mbb += wt * wb * wb;
                        mab += wt * wa * wb;
                    }
                }
                double va = maa - ma * ma;
                double vb = mbb - mb * mb;
                double cov = mab - ma * mb;
                acc += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                       ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
                ++count;
            }
        }
        total += acc / count;
    }
    return total / a.channels();
}

TEST(Psnr, IdenticalImagesAreInfinitelyClean) {
    std::mt19937_64 rng(11);
    Image a = random_image(rng, 6, 9, 3);
    EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
}

TEST(Psnr, UniformErrorOfTenPercentScoresTwentyDecibels) {
    Image a(8, 8, 1, 0.4);
    Image b(8, 8, 1, 0.5);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Psnr, MismatchedShapesAreRejected) {
    Image a(4, 4, 1), b(4, 5, 1);
    EXPECT_THROW(psnr(a, b), ContractError);
    EXPECT_THROW(ssim(Image(12, 12, 1), Image(12, 13, 1)), ContractError);
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
    std::mt19937_64 rng(12);
    Image a = random_image(rng, 16, 13, 2);
    EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, MatchesANaiveWindowedReference) {
    std::mt19937_64 rng(13);
    Image a = random_image(rng, 16, 16, 1);
    Image b = random_image(rng, 16, 16, 1);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-9);

    Image c = random_image(rng, 18, 14, 2);
    Image d = random_image(rng, 18, 14, 2);
    EXPECT_NEAR(ssim(c, d), ssim_oracle(c, d), 1e-9);
}

TEST(Ssim, NoiseLowersTheScoreMonotonically) {
    std::mt19937_64 rng(14);
    Image a = random_image(rng, 24, 24, 1);
    std::normal_distribution<double> noise(0.0, 1.0);
    Image small = a, large = a;
    for (size_t i = 0; i < a.size(); ++i) {
        double n = noise(rng);
        small.raw()[i] += 0.02 * n;
        large.raw()[i] += 0.2 * n;
    }
    double s_small = ssim(a, small);
    double s_large = ssim(a, large);
    EXPECT_LT(s_large, s_small);
    EXPECT_LT(s_small, 1.0);
    EXPECT_GT(s_small, 0.8);
}

TEST(Synthetic, UnknownSceneNameListsTheValidOnes) {
    try {
        make_synthetic_scene("wobbling_cube", 1);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(
                      "static_texture, translating_blob, pulsating_sheet"),
                  std::string::npos);
    }
}

TEST(Synthetic, SameSeedReproducesTheSceneExactly) {
    SyntheticScene x = make_synthetic_scene("translating_blob", 7, 4, 32);
    SyntheticScene y = make_synthetic_scene("translating_blob", 7, 4, 32);
    ASSERT_EQ(x.frame_count, 4);
    ASSERT_EQ(x.dataset.frames.size(), 4u);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(x.dataset.frames[i].image.raw(), y.dataset.frames[i].image.raw());
        EXPECT_EQ(x.dataset.frames[i].depth.raw(), y.dataset.frames[i].depth.raw());
        EXPECT_EQ(x.dataset.frames[i].time, y.dataset.frames[i].time);
        EXPECT_EQ(x.clouds[i].positions, y.clouds[i].positions);
        EXPECT_EQ(x.clouds[i].sh_coeffs, y.clouds[i].sh_coeffs);
    }
    for (int i = 1; i < 4; ++i) {
        EXPECT_EQ(x.dataset.gt_flows[i].u.raw(), y.dataset.gt_flows[i].u.raw());
        EXPECT_EQ(x.dataset.gt_flows[i].v.raw(), y.dataset.gt_flows[i].v.raw());
        EXPECT_EQ(x.dataset.gt_flows[i].valid.raw(), y.dataset.gt_flows[i].valid.raw());
    }

    SyntheticScene z = make_synthetic_scene("translating_blob", 8, 4, 32);
    EXPECT_GT(max_abs_diff(x.dataset.frames[0].image, z.dataset.frames[0].image), 0.0);
}

TEST(Synthetic, StaticTextureSceneIsTrulyStatic) {
    SyntheticScene scene = make_synthetic_scene("static_texture", 21, 3, 32);
    ASSERT_EQ(scene.frame_count, 3);
    ASSERT_TRUE(scene.dataset.texture_region.has_value());
    std::array<int, 4> region = {8, 8, 24, 24};
    EXPECT_EQ(*scene.dataset.texture_region, region);

    for (int i = 1; i < 3; ++i) {
        EXPECT_EQ(scene.dataset.frames[i].image.raw(), scene.dataset.frames[0].image.raw());
        const FlowField& flow = scene.dataset.gt_flows[i];
        double max_mag = 0.0;
        double valid_count = 0.0;
        for (size_t p = 0; p < flow.u.size(); ++p) {
            max_mag = std::max(max_mag, std::abs(flow.u.raw()[p]) + std::abs(flow.v.raw()[p]));
            valid_count += flow.valid.raw()[p];
        }
        EXPECT_EQ(max_mag, 0.0);
        EXPECT_GT(valid_count, 0.0);
    }
    EXPECT_NEAR(scene.dataset.frames[1].time, 1.0 / 3.0, 1e-15);
}

TEST(Synthetic, TranslatingBlobMovesExactlyTwoPixelsPerFrame) {
    SyntheticScene scene = make_synthetic_scene("translating_blob", 3, 4, 64);
    ASSERT_TRUE(scene.dataset.has_gt_flow);
    for (int i = 1; i < 4; ++i) {
        const FlowField& flow = scene.dataset.gt_flows[i];
        int moving_pixels = 0;
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                if (flow.valid.at(y, x, 0) == 0.0) continue;
                double u = flow.u.at(y, x, 0);
                double v = flow.v.at(y, x, 0);
                EXPECT_NEAR(v, 0.0, 1e-9);
                EXPECT_LE(std::min(std::abs(u), std::abs(u - 2.0)), 1e-9);
                if (std::abs(u - 2.0) <= 1e-9) ++moving_pixels;
            }
        }
        EXPECT_GE(moving_pixels, 50);
    }
}

TEST(Synthetic, PulsatingSheetActuallyPulsates) {
    SyntheticScene scene = make_synthetic_scene("pulsating_sheet", 5, 4, 32);
    double peak = 0.0;
    const FlowField& flow = scene.dataset.gt_flows[1];
    for (size_t p = 0; p < flow.u.size(); ++p) {
        if (flow.valid.raw()[p] == 0.0) continue;
        peak = std::max(peak, std::hypot(flow.u.raw()[p], flow.v.raw()[p]));
    }
    EXPECT_GT(peak, 0.05);
    EXPECT_LT(peak, 8.0);
}

TEST(Synthetic, EstimatedFlowOnRenderedFramesMatchesTheAnalyticFlow) {
    SyntheticScene scene = make_synthetic_scene("translating_blob", 5, 2, 64);
    LkOptions opts;
    FlowField lk = lk_flow(scene.dataset.frames[0].image, scene.dataset.frames[1].image, opts);
    const FlowField& gt = scene.dataset.gt_flows[1];

    double epe_sum = 0.0;
    int count = 0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            if (gt.valid.at(y, x, 0) == 0.0) continue;
            if (std::abs(gt.u.at(y, x, 0)) < 1.0) continue;  // only the moving blob
            epe_sum += std::hypot(lk.u.at(y, x, 0) - gt.u.at(y, x, 0),
                                  lk.v.at(y, x, 0) - gt.v.at(y, x, 0));
            ++count;
        }
    }
    ASSERT_GT(count, 50);
    EXPECT_LE(epe_sum / count, 0.25);
}

}  // namespace
}  // namespace fsplat