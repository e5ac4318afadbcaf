#include "fsplat/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "fsplat/errors.hpp"

namespace fsplat {

double psnr(const Image& a, const Image& b) {
    require(a.same_shape(b), "psnr: shape mismatch");
    require(a.size() > 0, "psnr: empty images");
    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.raw()[i] - b.raw()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    require(a.same_shape(b), "ssim: shape mismatch");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    require(a.height() >= kWin && a.width() >= kWin, "ssim: image smaller than the window");

    double w[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            double di = i - kWin / 2, dj = j - kWin / 2;
            w[i][j] = std::exp(-(di * di + dj * dj) / (2 * kSigma * kSigma));
            wsum += w[i][j];
        }
    }
    for (auto& row : w)
        for (double& v : row) v /= wsum;

    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double acc = 0.0;
        size_t count = 0;
        for (int y = 0; y + kWin <= a.height(); ++y) {
            for (int x = 0; x + kWin <= a.width(); ++x) {
                double mx = 0, my = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        mx += w[i][j] * a.at(y + i, x + j, c);
                        my += w[i][j] * b.at(y + i, x + j, c);
                    }
                }
                double vx = 0, vy = 0, cov = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        double da = a.at(y + i, x + j, c) - mx;
                        double db = b.at(y + i, x + j, c) - my;
                        vx += w[i][j] * da * da;
                        vy += w[i][j] * db * db;
                        cov += w[i][j] * da * db;
                    }
                }
                double num = (2 * mx * my + kC1) * (2 * cov + kC2);
                double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
                acc += num / den;
                ++count;
            }
        }
        total += acc / static_cast<double>(count);
    }
    return total / a.channels();
}

}  // namespace fsplat
