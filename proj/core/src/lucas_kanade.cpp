#include "fsplat/lucas_kanade.hpp"

#include <algorithm>
#include <cmath>

#include "fsplat/errors.hpp"
#include "fsplat/flow_ops.hpp"

namespace fsplat {

namespace {

Image multiply(const Image& a, const Image& b) {
    Image out(a.height(), a.width(), 1);
    for (size_t i = 0; i < out.size(); ++i) out.raw()[i] = a.raw()[i] * b.raw()[i];
    return out;
}

void level_setup(LkLevelState& level, int radius, double eps) {
    central_gradients(level.a, &level.ix, &level.iy);
    Image sxx = box_sum(multiply(level.ix, level.ix), radius);
    Image sxy = box_sum(multiply(level.ix, level.iy), radius);
    Image syy = box_sum(multiply(level.iy, level.iy), radius);
    const int H = level.a.height(), W = level.a.width();
    level.m00 = Image(H, W, 1);
    level.m01 = Image(H, W, 1);
    level.m11 = Image(H, W, 1);
    for (size_t i = 0; i < sxx.size(); ++i) {
        double a = sxx.raw()[i] + eps;
        double b = sxy.raw()[i];
        double c = syy.raw()[i] + eps;
        double det = a * c - b * b;
        level.m00.raw()[i] = c / det;
        level.m01.raw()[i] = -b / det;
        level.m11.raw()[i] = a / det;
    }
}

}  // namespace

FlowField lk_flow(const Image& frame_a, const Image& frame_b, const LkOptions& options,
                  LkContext* ctx) {
    require(frame_a.height() == frame_b.height() && frame_a.width() == frame_b.width(),
            "lk_flow: frame shape mismatch");
    require(options.levels >= 1, "lk_flow: levels must be >= 1");
    require(options.window >= 3 && options.window % 2 == 1, "lk_flow: window must be odd and >= 3");
    const int radius = options.window / 2;

    LkContext local_ctx;
    LkContext& C = ctx ? *ctx : local_ctx;
    C.options = options;
    C.channels_a = frame_a.channels();
    C.channels_b = frame_b.channels();
    C.levels.clear();

    // Pyramid, truncated when the next level would be smaller than the
    // window.
    C.levels.emplace_back();
    C.levels[0].a = rgb_to_gray(frame_a);
    C.levels[0].b = rgb_to_gray(frame_b);
    while (static_cast<int>(C.levels.size()) < options.levels) {
        const LkLevelState& prev = C.levels.back();
        int hn = (prev.a.height() + 1) / 2, wn = (prev.a.width() + 1) / 2;
        if (std::min(hn, wn) < options.window) break;
        LkLevelState next;
        next.a = downsample2(prev.a);
        next.b = downsample2(prev.b);
        C.levels.push_back(std::move(next));
    }
    for (LkLevelState& level : C.levels) level_setup(level, radius, options.tikhonov);

    const int L = static_cast<int>(C.levels.size());
    Image u, v;
    for (int l = L - 1; l >= 0; --l) {
        LkLevelState& level = C.levels[l];
        const int H = level.a.height(), W = level.a.width();
        if (l == L - 1) {
            u = Image(H, W, 1);
            v = Image(H, W, 1);
        } else {
            // Upsample from the coarser level, displacements rescaled by the
            // actual size ratio per axis.
            Image u_f(H, W, 1), v_f(H, W, 1);
            upsample_bilinear(u, &u_f);
            upsample_bilinear(v, &v_f);
            double sx = static_cast<double>(W) / C.levels[l + 1].a.width();
            double sy = static_cast<double>(H) / C.levels[l + 1].a.height();
            for (double& x : u_f.raw()) x *= sx;
            for (double& x : v_f.raw()) x *= sy;
            u = std::move(u_f);
            v = std::move(v_f);
        }
        for (int k = 0; k < options.iterations; ++k) {
            LkIterState iter;
            iter.flow_u_in = u;
            iter.flow_v_in = v;
            Image bw = warp_bilinear(level.b, u, v);
            iter.it = Image(H, W, 1);
            for (size_t i = 0; i < iter.it.size(); ++i) {
                iter.it.raw()[i] = bw.raw()[i] - level.a.raw()[i];
            }
            iter.sxt = box_sum(multiply(level.ix, iter.it), radius);
            iter.syt = box_sum(multiply(level.iy, iter.it), radius);
            for (size_t i = 0; i < u.size(); ++i) {
                double sxt = iter.sxt.raw()[i], syt = iter.syt.raw()[i];
                u.raw()[i] -= level.m00.raw()[i] * sxt + level.m01.raw()[i] * syt;
                v.raw()[i] -= level.m01.raw()[i] * sxt + level.m11.raw()[i] * syt;
            }
            level.iters.push_back(std::move(iter));
        }
    }

    FlowField flow;
    flow.u = std::move(u);
    flow.v = std::move(v);
    flow.valid = Image(frame_a.height(), frame_a.width(), 1, 1.0);
    return flow;
}

void lk_flow_backward(const LkContext& ctx, const Image& grad_u, const Image& grad_v,
                      Image* grad_frame_a, Image* grad_frame_b) {
    const int L = static_cast<int>(ctx.levels.size());
    require(L >= 1, "lk_flow_backward: empty context");
    const int radius = ctx.options.window / 2;

    std::vector<Image> da(L), db(L);
    for (int l = 0; l < L; ++l) {
        da[l] = Image(ctx.levels[l].a.height(), ctx.levels[l].a.width(), 1);
        db[l] = Image(da[l].height(), da[l].width(), 1);
    }

    Image du = grad_u, dv = grad_v;
    for (int l = 0; l < L; ++l) {
        const LkLevelState& level = ctx.levels[l];
        const int H = level.a.height(), W = level.a.width();
        require(du.height() == H && du.width() == W, "lk_flow_backward: gradient shape mismatch");
        Image dix(H, W, 1), diy(H, W, 1);
        Image dm00(H, W, 1), dm01(H, W, 1), dm11(H, W, 1);

        for (int k = static_cast<int>(level.iters.size()) - 1; k >= 0; --k) {
            const LkIterState& iter = level.iters[k];
            // flow_out = flow_in - (Minv * s)(flow_in), s = (Sxt, Syt).
            Image dsxt(H, W, 1), dsyt(H, W, 1);
            for (size_t i = 0; i < dsxt.size(); ++i) {
                double gu = du.raw()[i], gv = dv.raw()[i];
                dsxt.raw()[i] = -(level.m00.raw()[i] * gu + level.m01.raw()[i] * gv);
                dsyt.raw()[i] = -(level.m01.raw()[i] * gu + level.m11.raw()[i] * gv);
                dm00.raw()[i] -= gu * iter.sxt.raw()[i];
                dm01.raw()[i] -= gu * iter.syt.raw()[i] + gv * iter.sxt.raw()[i];
                dm11.raw()[i] -= gv * iter.syt.raw()[i];
            }
            // box_sum is self-adjoint.
            Image p = box_sum(dsxt, radius);
            Image q = box_sum(dsyt, radius);
            Image dit(H, W, 1);
            for (size_t i = 0; i < dit.size(); ++i) {
                dit.raw()[i] = level.ix.raw()[i] * p.raw()[i] + level.iy.raw()[i] * q.raw()[i];
                dix.raw()[i] += iter.it.raw()[i] * p.raw()[i];
                diy.raw()[i] += iter.it.raw()[i] * q.raw()[i];
                da[l].raw()[i] -= dit.raw()[i];
            }
            // The identity path keeps du/dv; the warp adds its coordinate
            // chain on top.
            warp_bilinear_backward(level.b, iter.flow_u_in, iter.flow_v_in, dit, &db[l], &du, &dv);
        }

        // Inverse-matrix path: from dMinv to the structure-tensor sums and on
        // to the template gradients.
        Image dsxx(H, W, 1), dsxy(H, W, 1), dsyy(H, W, 1);
        for (size_t i = 0; i < dsxx.size(); ++i) {
            double m00 = level.m00.raw()[i], m01 = level.m01.raw()[i], m11 = level.m11.raw()[i];
            double g00 = dm00.raw()[i], g01 = dm01.raw()[i], g11 = dm11.raw()[i];
            dsxx.raw()[i] = -(m00 * m00 * g00 + m00 * m01 * g01 + m01 * m01 * g11);
            dsxy.raw()[i] =
                -(2 * m00 * m01 * g00 + (m00 * m11 + m01 * m01) * g01 + 2 * m01 * m11 * g11);
            dsyy.raw()[i] = -(m01 * m01 * g00 + m01 * m11 * g01 + m11 * m11 * g11);
        }
        Image bxx = box_sum(dsxx, radius);
        Image bxy = box_sum(dsxy, radius);
        Image byy = box_sum(dsyy, radius);
        for (size_t i = 0; i < bxx.size(); ++i) {
            dix.raw()[i] += 2 * level.ix.raw()[i] * bxx.raw()[i] + level.iy.raw()[i] * bxy.raw()[i];
            diy.raw()[i] += level.ix.raw()[i] * bxy.raw()[i] + 2 * level.iy.raw()[i] * byy.raw()[i];
        }
        central_gradients_adjoint(dix, diy, &da[l]);

        if (l + 1 < L) {
            // Initial flow at this level was the upsampled-and-rescaled
            // coarser flow.
            const int Hc = ctx.levels[l + 1].a.height(), Wc = ctx.levels[l + 1].a.width();
            double sx = static_cast<double>(W) / Wc;
            double sy = static_cast<double>(H) / Hc;
            Image du_scaled = du, dv_scaled = dv;
            for (double& x : du_scaled.raw()) x *= sx;
            for (double& x : dv_scaled.raw()) x *= sy;
            Image du_c(Hc, Wc, 1), dv_c(Hc, Wc, 1);
            upsample_bilinear_adjoint(du_scaled, &du_c);
            upsample_bilinear_adjoint(dv_scaled, &dv_c);
            du = std::move(du_c);
            dv = std::move(dv_c);
        }
    }

    // Collapse the pyramid: coarser-level image gradients flow through the
    // downsampling chain back to full resolution.
    for (int l = L - 1; l >= 1; --l) {
        downsample2_adjoint(da[l], &da[l - 1]);
        downsample2_adjoint(db[l], &db[l - 1]);
    }
    if (grad_frame_a) rgb_to_gray_backward(da[0], grad_frame_a);
    if (grad_frame_b) rgb_to_gray_backward(db[0], grad_frame_b);
}

}  // namespace fsplat
