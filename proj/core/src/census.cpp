#include "fsplat/census.hpp"

#include <cmath>

#include "fsplat/errors.hpp"
#include "fsplat/flow_ops.hpp"

namespace fsplat {

double census_loss(const Image& image_a, const Image& image_b, const CensusOptions& options,
                   const Image& valid, Image* grad_a) {
    require(image_a.height() == image_b.height() && image_a.width() == image_b.width(),
            "census_loss: frame shape mismatch");
    require(options.window >= 3 && options.window % 2 == 1,
            "census_loss: window must be odd and >= 3");
    const int H = image_a.height(), W = image_a.width();
    const int r = options.window / 2;
    const double tau2 = options.tau * options.tau;
    const double ce = options.rho_eps;

    Image ya = rgb_to_gray(image_a);
    Image yb = rgb_to_gray(image_b);
    Image dya(H, W, 1);

    size_t n_valid = 0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (!valid.empty() && valid.at(y, x, 0) == 0.0) continue;
            ++n_valid;
        }
    }
    if (n_valid == 0) return 0.0;

    double loss = 0.0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (!valid.empty() && valid.at(y, x, 0) == 0.0) continue;
            int y0 = std::max(0, y - r), y1 = std::min(H - 1, y + r);
            int x0 = std::max(0, x - r), x1 = std::min(W - 1, x + r);
            int count = (y1 - y0 + 1) * (x1 - x0 + 1) - 1;
            if (count == 0) continue;
            double ca = ya.at(y, x, 0);
            double cb = yb.at(y, x, 0);
            double dist = 0.0;
            for (int ny = y0; ny <= y1; ++ny) {
                for (int nx = x0; nx <= x1; ++nx) {
                    if (ny == y && nx == x) continue;
                    double xa = ya.at(ny, nx, 0) - ca;
                    double xb = yb.at(ny, nx, 0) - cb;
                    double na = std::sqrt(xa * xa + tau2);
                    double da = xa / na;
                    double db = xb / std::sqrt(xb * xb + tau2);
                    double d = da - db;
                    double denom = d * d + ce;
                    dist += d * d / denom;
                    if (grad_a) {
                        // d(rho)/dd * d(da)/dxa, scaled by the two averages.
                        double coeff = (2.0 * d * ce / (denom * denom)) * (tau2 / (na * na * na)) /
                                       (static_cast<double>(count) * n_valid);
                        dya.at(ny, nx, 0) += coeff;
                        dya.at(y, x, 0) -= coeff;
                    }
                }
            }
            loss += dist / count;
        }
    }
    if (grad_a) rgb_to_gray_backward(dya, grad_a);
    return loss / static_cast<double>(n_valid);
}

}  // namespace fsplat
