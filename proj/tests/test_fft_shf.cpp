#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "fsplat/fft.hpp"
#include "fsplat/shf.hpp"
#include "oracles.hpp"

using namespace fsplat;
using fsplat::test::naive_dft2_centered;
using fsplat::test::naive_idft2_real;
using fsplat::test::random_image;
using fsplat::test::uniform;

namespace {

// Applies the same disc rule as make_frequency_mask to the naive spectrum and
// inverse-transforms, giving an independent high-frequency residual.
Image naive_high_freq(const Image& image, double radius_ratio) {
    int h = image.height(), w = image.width();
    double radius = radius_ratio * std::min(h, w) / 2.0;
    int cy = h / 2, cx = w / 2;
    Image out(h, w, image.channels());
    for (int c = 0; c < image.channels(); ++c) {
        std::vector<std::complex<double>> spec = naive_dft2_centered(image, c);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double d = std::hypot(y - cy, x - cx);
                if (d <= radius) spec[y * w + x] = 0.0;
            }
        }
        naive_idft2_real(spec, h, w, c, &out);
    }
    return out;
}

}  // namespace

TEST(Fft, MatchesNaiveDftOnRandomImages) {
    std::mt19937_64 rng(51);
    const int shapes[][3] = {{4, 4, 1}, {7, 5, 2}, {16, 16, 3}, {8, 13, 1}};
    for (const auto& s : shapes) {
        Image img = random_image(rng, s[0], s[1], s[2]);
        Spectrum spec = fft2(img);
        ASSERT_EQ(spec.amplitude.height(), s[0]);
        ASSERT_EQ(spec.amplitude.width(), s[1]);
        for (int c = 0; c < s[2]; ++c) {
            std::vector<std::complex<double>> naive = naive_dft2_centered(img, c);
            for (int y = 0; y < s[0]; ++y) {
                for (int x = 0; x < s[1]; ++x) {
                    std::complex<double> z =
                        std::polar(spec.amplitude.at(y, x, c), spec.phase.at(y, x, c));
                    std::complex<double> n = naive[y * s[1] + x];
                    EXPECT_NEAR(spec.amplitude.at(y, x, c), std::abs(n), 1e-6);
                    EXPECT_LT(std::abs(z - n), 1e-6)
                        << "bin (" << y << ", " << x << ") channel " << c;
                }
            }
        }
    }
}

TEST(Fft, InverseUndoesForward) {
    std::mt19937_64 rng(53);
    const int shapes[][3] = {{4, 4, 1}, {5, 7, 2}, {64, 64, 3}};
    for (const auto& s : shapes) {
        Image img = random_image(rng, s[0], s[1], s[2]);
        Image back = ifft2(fft2(img));
        EXPECT_LT(max_abs_diff(img, back), 1e-6);
    }
}

TEST(Fft, ConstantImageConcentratesAtTheDcBin) {
    Image img(6, 5, 1, 0.7);
    Spectrum spec = fft2(img);
    int cy = 3, cx = 2;  // floor(h/2), floor(w/2)
    EXPECT_NEAR(spec.amplitude.at(cy, cx, 0), 6 * 5 * 0.7, 1e-9);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 5; ++x) {
            if (y == cy && x == cx) continue;
            EXPECT_NEAR(spec.amplitude.at(y, x, 0), 0.0, 1e-9);
        }
    }
}

TEST(Fft, ImpulseHasFlatUnitAmplitude) {
    Image img(8, 8, 1, 0.0);
    img.at(0, 0, 0) = 1.0;
    Spectrum spec = fft2(img);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) EXPECT_NEAR(spec.amplitude.at(y, x, 0), 1.0, 1e-9);
    }
}

TEST(Fft, MaskIsAnInclusiveDiscAroundDc) {
    FrequencyMask m = make_frequency_mask(8, 8, 0.25);  // radius 1.0
    double count = 0;
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) count += m.mask.at(y, x, 0);
    }
    EXPECT_EQ(count, 5.0);  // DC plus its four distance-1 neighbors
    EXPECT_EQ(m.mask.at(4, 4, 0), 1.0);
    EXPECT_EQ(m.mask.at(3, 4, 0), 1.0);
    EXPECT_EQ(m.mask.at(5, 4, 0), 1.0);
    EXPECT_EQ(m.mask.at(4, 3, 0), 1.0);
    EXPECT_EQ(m.mask.at(4, 5, 0), 1.0);
    EXPECT_EQ(m.mask.at(3, 3, 0), 0.0);  // distance sqrt(2), outside
}

TEST(Fft, ConstantImageHasNoHighFrequencies) {
    Image img(8, 8, 2, 0.4);
    Image high = high_freq_image(img, 0.25);
    for (size_t i = 0; i < high.size(); ++i) EXPECT_NEAR(high.raw()[i], 0.0, 1e-9);
}

TEST(Fft, ZeroMeanImagePassesThroughADcOnlyFilter) {
    std::mt19937_64 rng(57);
    Image img = random_image(rng, 8, 8, 1, -0.5, 0.5);
    double mean = 0.0;
    for (size_t i = 0; i < img.size(); ++i) mean += img.raw()[i];
    mean /= img.size();
    for (size_t i = 0; i < img.size(); ++i) img.raw()[i] -= mean;

    // Radius below one bin: the disc holds only the DC bin, which is zero.
    Image high = high_freq_image(img, 0.1);
    EXPECT_LT(max_abs_diff(img, high), 1e-6);
}

TEST(Fft, NyquistCheckerboardSurvivesTheLowFrequencyCut) {
    Image img(16, 16, 1);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) img.at(y, x, 0) = ((x + y) % 2 == 0) ? 1.0 : -1.0;
    }
    Image high = high_freq_image(img, 0.25);
    EXPECT_LT(max_abs_diff(img, high), 1e-6);
    // The complementary low-pass keeps nothing.
    Image low = filter_frequencies(img, 0.25, true);
    for (size_t i = 0; i < low.size(); ++i) EXPECT_NEAR(low.raw()[i], 0.0, 1e-6);
}

TEST(Fft, HighAndLowPassSumBackToTheImage) {
    std::mt19937_64 rng(59);
    Image img = random_image(rng, 12, 10, 3);
    Image high = filter_frequencies(img, 0.25, false);
    Image low = filter_frequencies(img, 0.25, true);
    for (size_t i = 0; i < img.size(); ++i) {
        EXPECT_NEAR(high.raw()[i] + low.raw()[i], img.raw()[i], 1e-9);
    }
}

TEST(Shf, WeightMapMatchesTheNaiveResidual) {
    std::mt19937_64 rng(61);
    Image gt = random_image(rng, 8, 8, 3);
    Image weights = shf_weight_map(gt, 0.25);
    Image naive = naive_high_freq(gt, 0.25);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            for (int c = 0; c < 3; ++c) {
                EXPECT_NEAR(weights.at(y, x, c), std::abs(naive.at(y, x, c)), 1e-9);
            }
        }
    }
}

TEST(Shf, ExactReconstructionCostsNothing) {
    std::mt19937_64 rng(63);
    Image gt = random_image(rng, 8, 8, 3);
    ShfResult r = shf_loss(gt, gt, 0.25);
    EXPECT_EQ(r.loss, 0.0);
    for (size_t i = 0; i < r.grad_rendered.size(); ++i) EXPECT_EQ(r.grad_rendered.raw()[i], 0.0);
}

TEST(Shf, ConstantGroundTruthWeighsNothing) {
    std::mt19937_64 rng(65);
    Image gt(8, 8, 3, 0.6);
    Image rendered = random_image(rng, 8, 8, 3);
    ShfResult r = shf_loss(gt, rendered, 0.25);
    EXPECT_NEAR(r.loss, 0.0, 1e-8);
}

TEST(Shf, StripePatternChargesExactlyTheWeightedResidual) {
    // Vertical stripes at the x Nyquist; ratio 0.25 on a 4x4 leaves only the
    // DC bin inside the disc, so the weights equal the stripe magnitude.
    Image gt(4, 4, 1);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) gt.at(y, x, 0) = 0.5 + ((x % 2 == 0) ? 0.25 : -0.25);
    }
    Image rendered = gt;
    for (size_t i = 0; i < rendered.size(); ++i) rendered.raw()[i] += 0.1;

    Image naive = naive_high_freq(gt, 0.25);
    double expected = 0.0;
    for (size_t i = 0; i < naive.size(); ++i) expected += std::abs(naive.raw()[i]) * 0.1;

    ShfResult r = shf_loss(gt, rendered, 0.25);
    EXPECT_NEAR(r.loss, expected, 1e-9);
    EXPECT_NEAR(r.loss, 16 * 0.25 * 0.1, 1e-9);  // |residual| = 0.25 at every pixel

    // rendered > gt everywhere, so the gradient is +w at every pixel.
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            EXPECT_NEAR(r.grad_rendered.at(y, x, 0), std::abs(naive.at(y, x, 0)), 1e-9);
        }
    }
}

TEST(Shf, GradientMatchesFiniteDifferencesAwayFromKinks) {
    std::mt19937_64 rng(67);
    Image gt = random_image(rng, 6, 6, 2);
    Image rendered = gt;
    // Perturb away from zero residual so |.| is differentiable at the point.
    for (size_t i = 0; i < rendered.size(); ++i) {
        double s = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
        rendered.raw()[i] += s * uniform(rng, 0.05, 0.2);
    }
    ShfResult r = shf_loss(gt, rendered, 0.25);
    const double h = 1e-6;
    std::uniform_int_distribution<size_t> pick(0, rendered.size() - 1);
    for (int trial = 0; trial < 20; ++trial) {
        size_t k = pick(rng);
        Image rp = rendered, rm = rendered;
        rp.raw()[k] += h;
        rm.raw()[k] -= h;
        double fd =
            (shf_loss(gt, rp, 0.25).loss - shf_loss(gt, rm, 0.25).loss) / (2 * h);
        EXPECT_NEAR(r.grad_rendered.raw()[k], fd, 1e-8) << "pixel " << k;
    }
}

TEST(Shf, PrecomputedWeightsAgreeWithTheOneShotPath) {
    std::mt19937_64 rng(69);
    Image gt = random_image(rng, 8, 8, 3);
    Image rendered = random_image(rng, 8, 8, 3);
    Image weights = shf_weight_map(gt, 0.25);
    ShfResult a = shf_loss_with_weights(weights, gt, rendered);
    ShfResult b = shf_loss(gt, rendered, 0.25);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(max_abs_diff(a.grad_rendered, b.grad_rendered), 0.0);
}
