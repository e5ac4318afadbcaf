#include "fsplat/flow_ops.hpp"

#include <algorithm>
#include <cmath>

#include "fsplat/errors.hpp"

namespace fsplat {

namespace {
constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;
}

Image rgb_to_gray(const Image& image) {
    if (image.channels() == 1) return image;
    require(image.channels() == 3, "rgb_to_gray: expected 1 or 3 channels");
    Image gray(image.height(), image.width(), 1);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            gray.at(y, x, 0) = kLumaR * image.at(y, x, 0) + kLumaG * image.at(y, x, 1) +
                               kLumaB * image.at(y, x, 2);
        }
    }
    return gray;
}

void rgb_to_gray_backward(const Image& grad_gray, Image* grad_image) {
    if (grad_image->channels() == 1) {
        for (size_t i = 0; i < grad_gray.size(); ++i) grad_image->raw()[i] += grad_gray.raw()[i];
        return;
    }
    for (int y = 0; y < grad_gray.height(); ++y) {
        for (int x = 0; x < grad_gray.width(); ++x) {
            double g = grad_gray.at(y, x, 0);
            grad_image->at(y, x, 0) += kLumaR * g;
            grad_image->at(y, x, 1) += kLumaG * g;
            grad_image->at(y, x, 2) += kLumaB * g;
        }
    }
}

void central_gradients(const Image& gray, Image* gx, Image* gy) {
    const int H = gray.height(), W = gray.width();
    *gx = Image(H, W, 1);
    *gy = Image(H, W, 1);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            int xm = std::max(x - 1, 0), xp = std::min(x + 1, W - 1);
            int ym = std::max(y - 1, 0), yp = std::min(y + 1, H - 1);
            gx->at(y, x, 0) = 0.5 * (gray.at(y, xp, 0) - gray.at(y, xm, 0));
            gy->at(y, x, 0) = 0.5 * (gray.at(yp, x, 0) - gray.at(ym, x, 0));
        }
    }
}

void central_gradients_adjoint(const Image& grad_gx, const Image& grad_gy, Image* grad_gray) {
    const int H = grad_gx.height(), W = grad_gx.width();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            int xm = std::max(x - 1, 0), xp = std::min(x + 1, W - 1);
            int ym = std::max(y - 1, 0), yp = std::min(y + 1, H - 1);
            grad_gray->at(y, xp, 0) += 0.5 * grad_gx.at(y, x, 0);
            grad_gray->at(y, xm, 0) -= 0.5 * grad_gx.at(y, x, 0);
            grad_gray->at(yp, x, 0) += 0.5 * grad_gy.at(y, x, 0);
            grad_gray->at(ym, x, 0) -= 0.5 * grad_gy.at(y, x, 0);
        }
    }
}

Image box_sum(const Image& field, int radius) {
    const int H = field.height(), W = field.width();
    // Separable: rows then columns.
    Image rows(H, W, 1);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int k = std::max(0, x - radius); k <= std::min(W - 1, x + radius); ++k) {
                s += field.at(y, k, 0);
            }
            rows.at(y, x, 0) = s;
        }
    }
    Image out(H, W, 1);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int k = std::max(0, y - radius); k <= std::min(H - 1, y + radius); ++k) {
                s += rows.at(k, x, 0);
            }
            out.at(y, x, 0) = s;
        }
    }
    return out;
}

Image downsample2(const Image& field) {
    const int H = field.height(), W = field.width();
    const int Ho = (H + 1) / 2, Wo = (W + 1) / 2;
    static const double taps[3] = {0.25, 0.5, 0.25};
    Image rows(H, Wo, 1);
    for (int y = 0; y < H; ++y) {
        for (int xo = 0; xo < Wo; ++xo) {
            double s = 0.0;
            for (int k = -1; k <= 1; ++k) {
                int xi = std::clamp(2 * xo + k, 0, W - 1);
                s += taps[k + 1] * field.at(y, xi, 0);
            }
            rows.at(y, xo, 0) = s;
        }
    }
    Image out(Ho, Wo, 1);
    for (int yo = 0; yo < Ho; ++yo) {
        for (int x = 0; x < Wo; ++x) {
            double s = 0.0;
            for (int k = -1; k <= 1; ++k) {
                int yi = std::clamp(2 * yo + k, 0, H - 1);
                s += taps[k + 1] * rows.at(yi, x, 0);
            }
            out.at(yo, x, 0) = s;
        }
    }
    return out;
}

void downsample2_adjoint(const Image& grad_down, Image* grad_src) {
    const int H = grad_src->height(), W = grad_src->width();
    const int Ho = grad_down.height(), Wo = grad_down.width();
    static const double taps[3] = {0.25, 0.5, 0.25};
    Image rows(H, Wo, 1);
    for (int yo = 0; yo < Ho; ++yo) {
        for (int x = 0; x < Wo; ++x) {
            double g = grad_down.at(yo, x, 0);
            for (int k = -1; k <= 1; ++k) {
                int yi = std::clamp(2 * yo + k, 0, H - 1);
                rows.at(yi, x, 0) += taps[k + 1] * g;
            }
        }
    }
    for (int y = 0; y < H; ++y) {
        for (int xo = 0; xo < Wo; ++xo) {
            double g = rows.at(y, xo, 0);
            for (int k = -1; k <= 1; ++k) {
                int xi = std::clamp(2 * xo + k, 0, W - 1);
                grad_src->at(y, xi, 0) += taps[k + 1] * g;
            }
        }
    }
}

namespace {

struct Sample {
    int x0, y0;
    double fx, fy;
    bool x_interior, y_interior;
};

Sample locate_sample(double xs, double ys, int W, int H) {
    Sample s;
    s.x_interior = xs > 0.0 && xs < W - 1;
    s.y_interior = ys > 0.0 && ys < H - 1;
    xs = std::clamp(xs, 0.0, static_cast<double>(W - 1));
    ys = std::clamp(ys, 0.0, static_cast<double>(H - 1));
    s.x0 = std::min(static_cast<int>(xs), W - 2);
    s.y0 = std::min(static_cast<int>(ys), H - 2);
    if (W == 1) s.x0 = 0;
    if (H == 1) s.y0 = 0;
    s.fx = xs - s.x0;
    s.fy = ys - s.y0;
    return s;
}

}  // namespace

void upsample_bilinear(const Image& src, Image* dst) {
    const int Hs = src.height(), Ws = src.width();
    const int Hd = dst->height(), Wd = dst->width();
    for (int y = 0; y < Hd; ++y) {
        double ys = (y + 0.5) * Hs / Hd - 0.5;
        for (int x = 0; x < Wd; ++x) {
            double xs = (x + 0.5) * Ws / Wd - 0.5;
            Sample s = locate_sample(xs, ys, Ws, Hs);
            double v00 = src.at(s.y0, s.x0, 0);
            double v01 = src.at(s.y0, std::min(s.x0 + 1, Ws - 1), 0);
            double v10 = src.at(std::min(s.y0 + 1, Hs - 1), s.x0, 0);
            double v11 = src.at(std::min(s.y0 + 1, Hs - 1), std::min(s.x0 + 1, Ws - 1), 0);
            dst->at(y, x, 0) = (1 - s.fy) * ((1 - s.fx) * v00 + s.fx * v01) +
                               s.fy * ((1 - s.fx) * v10 + s.fx * v11);
        }
    }
}

void upsample_bilinear_adjoint(const Image& grad_dst, Image* grad_src) {
    const int Hs = grad_src->height(), Ws = grad_src->width();
    const int Hd = grad_dst.height(), Wd = grad_dst.width();
    for (int y = 0; y < Hd; ++y) {
        double ys = (y + 0.5) * Hs / Hd - 0.5;
        for (int x = 0; x < Wd; ++x) {
            double xs = (x + 0.5) * Ws / Wd - 0.5;
            Sample s = locate_sample(xs, ys, Ws, Hs);
            double g = grad_dst.at(y, x, 0);
            int x1 = std::min(s.x0 + 1, Ws - 1), y1 = std::min(s.y0 + 1, Hs - 1);
            grad_src->at(s.y0, s.x0, 0) += g * (1 - s.fy) * (1 - s.fx);
            grad_src->at(s.y0, x1, 0) += g * (1 - s.fy) * s.fx;
            grad_src->at(y1, s.x0, 0) += g * s.fy * (1 - s.fx);
            grad_src->at(y1, x1, 0) += g * s.fy * s.fx;
        }
    }
}

Image warp_bilinear(const Image& src, const Image& u, const Image& v) {
    const int H = src.height(), W = src.width();
    Image out(H, W, 1);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            Sample s = locate_sample(x + u.at(y, x, 0), y + v.at(y, x, 0), W, H);
            int x1 = std::min(s.x0 + 1, W - 1), y1 = std::min(s.y0 + 1, H - 1);
            double v00 = src.at(s.y0, s.x0, 0);
            double v01 = src.at(s.y0, x1, 0);
            double v10 = src.at(y1, s.x0, 0);
            double v11 = src.at(y1, x1, 0);
            out.at(y, x, 0) = (1 - s.fy) * ((1 - s.fx) * v00 + s.fx * v01) +
                              s.fy * ((1 - s.fx) * v10 + s.fx * v11);
        }
    }
    return out;
}

void warp_bilinear_backward(const Image& src, const Image& u, const Image& v,
                            const Image& grad_out, Image* grad_src, Image* grad_u, Image* grad_v) {
    const int H = src.height(), W = src.width();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double g = grad_out.at(y, x, 0);
            if (g == 0.0) continue;
            Sample s = locate_sample(x + u.at(y, x, 0), y + v.at(y, x, 0), W, H);
            int x1 = std::min(s.x0 + 1, W - 1), y1 = std::min(s.y0 + 1, H - 1);
            double v00 = src.at(s.y0, s.x0, 0);
            double v01 = src.at(s.y0, x1, 0);
            double v10 = src.at(y1, s.x0, 0);
            double v11 = src.at(y1, x1, 0);
            if (grad_src) {
                grad_src->at(s.y0, s.x0, 0) += g * (1 - s.fy) * (1 - s.fx);
                grad_src->at(s.y0, x1, 0) += g * (1 - s.fy) * s.fx;
                grad_src->at(y1, s.x0, 0) += g * s.fy * (1 - s.fx);
                grad_src->at(y1, x1, 0) += g * s.fy * s.fx;
            }
            if (grad_u && s.x_interior) {
                grad_u->at(y, x, 0) += g * ((1 - s.fy) * (v01 - v00) + s.fy * (v11 - v10));
            }
            if (grad_v && s.y_interior) {
                grad_v->at(y, x, 0) += g * ((1 - s.fx) * (v10 - v00) + s.fx * (v11 - v01));
            }
        }
    }
}

}  // namespace fsplat
