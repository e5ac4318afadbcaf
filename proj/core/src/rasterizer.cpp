#include "fsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fsplat/errors.hpp"
#include "fsplat/parallel.hpp"

namespace fsplat {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Mat2 invert_spd2(const Mat2& m, int gaussian_index) {
    double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (!(det > 0.0)) {
        throw NumericError("render: singular 2d covariance at gaussian index " +
                           std::to_string(gaussian_index));
    }
    Mat2 inv;
    inv << m(1, 1) / det, -m(0, 1) / det, -m(1, 0) / det, m(0, 0) / det;
    return inv;
}

void check_finite(const GaussianCloud& cloud) {
    for (size_t i = 0; i < cloud.size(); ++i) {
        bool ok = cloud.positions[i].allFinite() && cloud.rotations[i].allFinite() &&
                  cloud.log_scales[i].allFinite() && std::isfinite(cloud.opacity_logits[i]);
        const double* sh = cloud.sh_ptr(i);
        for (int k = 0; ok && k < cloud.sh_stride(); ++k) ok = std::isfinite(sh[k]);
        if (!ok) {
            throw NumericError("render: non-finite parameters at gaussian index " +
                               std::to_string(i));
        }
    }
}

}  // namespace

bool ellipse_intersects_rect(const Vec2& center, const Mat2& conic, double cutoff,
                             double x0, double y0, double x1, double y1) {
    double level = cutoff * cutoff;
    if (center.x() >= x0 && center.x() <= x1 && center.y() >= y0 && center.y() <= y1) {
        return true;
    }
    // The form is convex, so with the center outside the rectangle the
    // minimum over the rectangle sits on one of the four edges.
    Vec2 corners[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    double best = std::numeric_limits<double>::infinity();
    for (int e = 0; e < 4; ++e) {
        Vec2 a = corners[e];
        Vec2 b = corners[(e + 1) % 4];
        Vec2 d0 = a - center;
        Vec2 dir = b - a;
        double qa = dir.dot(conic * dir);
        double qb = dir.dot(conic * d0);
        double t = 0.0;
        if (qa > 0.0) t = std::clamp(-qb / qa, 0.0, 1.0);
        Vec2 d = d0 + t * dir;
        best = std::min(best, d.dot(conic * d));
    }
    return best <= level;
}

TileBinning cull_and_bin(const std::vector<ProjectedGaussian>& projected, int width, int height,
                         int tile_size, double sigma_cutoff) {
    require(tile_size > 0, "cull_and_bin: tile_size must be positive");
    TileBinning bins;
    bins.tile_size = tile_size;
    bins.tiles_x = (width + tile_size - 1) / tile_size;
    bins.tiles_y = (height + tile_size - 1) / tile_size;
    bins.lists.assign(static_cast<size_t>(bins.tiles_x) * bins.tiles_y, {});

    std::vector<int> order;
    order.reserve(projected.size());
    for (size_t i = 0; i < projected.size(); ++i) {
        if (projected[i].in_frustum) order.push_back(static_cast<int>(i));
    }
    std::stable_sort(order.begin(), order.end(), [&projected](int a, int b) {
        if (projected[a].depth != projected[b].depth) {
            return projected[a].depth < projected[b].depth;
        }
        return projected[a].cloud_index < projected[b].cloud_index;
    });

    for (int idx : order) {
        const ProjectedGaussian& g = projected[idx];
        if (sigma_cutoff <= 0.0) {
            for (auto& list : bins.lists) list.push_back(idx);
            continue;
        }
        double rx = sigma_cutoff * std::sqrt(g.cov2d(0, 0));
        double ry = sigma_cutoff * std::sqrt(g.cov2d(1, 1));
        int tx0 = std::max(0, static_cast<int>(std::floor((g.mean2d.x() - rx) / tile_size)));
        int tx1 = std::min(bins.tiles_x - 1,
                           static_cast<int>(std::floor((g.mean2d.x() + rx) / tile_size)));
        int ty0 = std::max(0, static_cast<int>(std::floor((g.mean2d.y() - ry) / tile_size)));
        int ty1 = std::min(bins.tiles_y - 1,
                           static_cast<int>(std::floor((g.mean2d.y() + ry) / tile_size)));
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                double x0 = tx * static_cast<double>(tile_size);
                double y0 = ty * static_cast<double>(tile_size);
                double x1 = std::min<double>(x0 + tile_size, width);
                double y1 = std::min<double>(y0 + tile_size, height);
                if (ellipse_intersects_rect(g.mean2d, g.conic, sigma_cutoff, x0, y0, x1, y1)) {
                    bins.lists[static_cast<size_t>(ty) * bins.tiles_x + tx].push_back(idx);
                }
            }
        }
    }
    return bins;
}

RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const RenderOptions& options,
                    RenderSavedState* saved_state) {
    require(camera.width > 0 && camera.height > 0, "render: empty camera viewport");
    cloud.check_consistent();
    check_finite(cloud);

    const int W = camera.width, H = camera.height;
    RenderOutput out;
    out.image = Image(H, W, 3);
    out.depth = Image(H, W, 1);
    out.alpha = Image(H, W, 1);

    std::vector<ProjectedGaussian> projected(cloud.size());
    const Vec3 cam_center = camera.camera_center();
    parallel_for(cloud.size(), options.threads, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            ProjectedGaussian& g = projected[i];
            g.cloud_index = static_cast<int>(i);
            Mat3 sigma3 = build_covariance(cloud.rotations[i], cloud.log_scales[i], &g.cov_ctx);
            ProjectionResult pr =
                project_gaussian(cloud.positions[i], sigma3, camera, &g.proj_ctx, options.cov2d_floor);
            g.in_frustum = pr.in_frustum;
            if (!pr.in_frustum) continue;
            g.mean2d = pr.mean2d;
            g.cov2d = pr.cov2d;
            g.conic = invert_spd2(pr.cov2d, static_cast<int>(i));
            g.depth = pr.depth;
            g.sigma = sigmoid(cloud.opacity_logits[i]);
            g.view_vec = cloud.positions[i] - cam_center;
            Vec3 dir = g.view_vec.norm() > 1e-12 ? g.view_vec.normalized() : Vec3(0, 0, 1);
            g.color = sh_to_color(cloud.sh_ptr(i), cloud.sh_degree, dir, &g.sh_ctx);
        }
    });

    TileBinning bins = cull_and_bin(projected, W, H, options.tile_size, options.sigma_cutoff);

    const size_t n_tiles = bins.lists.size();
    const double cutoff2 = options.sigma_cutoff > 0 ? options.sigma_cutoff * options.sigma_cutoff
                                                    : std::numeric_limits<double>::infinity();

    struct TileScratch {
        std::vector<PixelContrib> contribs;
        std::vector<int32_t> counts;   // per tile pixel, tile-local row-major
        std::vector<double> final_t;   // per tile pixel
    };
    std::vector<TileScratch> scratch(saved_state ? n_tiles : 0);

    parallel_for(n_tiles, options.threads, [&](size_t t_begin, size_t t_end) {
        for (size_t t = t_begin; t < t_end; ++t) {
            int tx = static_cast<int>(t % bins.tiles_x);
            int ty = static_cast<int>(t / bins.tiles_x);
            int px0 = tx * options.tile_size;
            int py0 = ty * options.tile_size;
            int px1 = std::min(px0 + options.tile_size, W);
            int py1 = std::min(py0 + options.tile_size, H);
            const std::vector<int>& list = bins.lists[t];
            TileScratch* ts = saved_state ? &scratch[t] : nullptr;
            if (ts) {
                ts->counts.assign(static_cast<size_t>(px1 - px0) * (py1 - py0), 0);
                ts->final_t.assign(static_cast<size_t>(px1 - px0) * (py1 - py0), 1.0);
            }
            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    double T = 1.0;
                    Vec3 color = Vec3::Zero();
                    double depth = 0.0;
                    int32_t count = 0;
                    for (int idx : list) {
                        const ProjectedGaussian& g = projected[idx];
                        Vec2 d(px + 0.5 - g.mean2d.x(), py + 0.5 - g.mean2d.y());
                        double q = d.dot(g.conic * d);
                        if (q > cutoff2) continue;
                        double alpha = std::min(g.sigma * std::exp(-0.5 * q), options.alpha_clamp);
                        color += g.color * (alpha * T);
                        depth += g.depth * alpha * T;
                        if (ts) {
                            ts->contribs.push_back({static_cast<int32_t>(idx), alpha});
                            ++count;
                        }
                        T *= (1.0 - alpha);
                        if (options.transmittance_eps > 0 && T < options.transmittance_eps) break;
                    }
                    out.image.at(py, px, 0) = color.x();
                    out.image.at(py, px, 1) = color.y();
                    out.image.at(py, px, 2) = color.z();
                    out.depth.at(py, px, 0) = depth;
                    out.alpha.at(py, px, 0) = 1.0 - T;
                    if (ts) {
                        size_t local = static_cast<size_t>(py - py0) * (px1 - px0) + (px - px0);
                        ts->counts[local] = count;
                        ts->final_t[local] = T;
                    }
                }
            }
        }
    });

    if (saved_state) {
        saved_state->camera = camera;
        saved_state->options = options;
        saved_state->cloud_size = cloud.size();
        saved_state->sh_degree = cloud.sh_degree;
        saved_state->projected = std::move(projected);
        saved_state->bins = std::move(bins);
        saved_state->pixel_offset.assign(static_cast<size_t>(W) * H, 0);
        saved_state->pixel_count.assign(static_cast<size_t>(W) * H, 0);
        size_t total = 0;
        for (const auto& ts : scratch) total += ts.contribs.size();
        saved_state->contribs.clear();
        saved_state->contribs.reserve(total);
        saved_state->final_transmittance.assign(static_cast<size_t>(W) * H, 1.0);
        // Merge per-tile scratch in tile order so the layout is independent
        // of how the tile loop was scheduled.
        for (size_t t = 0; t < n_tiles; ++t) {
            int tx = static_cast<int>(t % saved_state->bins.tiles_x);
            int ty = static_cast<int>(t / saved_state->bins.tiles_x);
            int px0 = tx * options.tile_size;
            int py0 = ty * options.tile_size;
            int px1 = std::min(px0 + options.tile_size, W);
            int py1 = std::min(py0 + options.tile_size, H);
            const TileScratch& ts = scratch[t];
            size_t consumed = 0;
            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    size_t local = static_cast<size_t>(py - py0) * (px1 - px0) + (px - px0);
                    size_t pix = static_cast<size_t>(py) * W + px;
                    saved_state->pixel_offset[pix] =
                        static_cast<int64_t>(saved_state->contribs.size());
                    saved_state->pixel_count[pix] = ts.counts[local];
                    saved_state->contribs.insert(saved_state->contribs.end(),
                                                 ts.contribs.begin() + consumed,
                                                 ts.contribs.begin() + consumed + ts.counts[local]);
                    consumed += ts.counts[local];
                    saved_state->final_transmittance[pix] = ts.final_t[local];
                }
            }
        }
    }
    return out;
}

RenderBackwardResult render_backward(const GaussianCloud& cloud, const Image& grad_image,
                                     const Image& grad_depth, const Image& grad_alpha,
                                     const RenderSavedState& st) {
    const int W = st.camera.width, H = st.camera.height;
    require(cloud.size() == st.cloud_size && cloud.sh_degree == st.sh_degree,
            "render_backward: cloud does not match saved render state");
    if (!grad_image.empty()) {
        require(grad_image.height() == H && grad_image.width() == W && grad_image.channels() == 3,
                "render_backward: grad_image shape does not match saved render state");
    }
    if (!grad_depth.empty()) {
        require(grad_depth.height() == H && grad_depth.width() == W && grad_depth.channels() == 1,
                "render_backward: grad_depth shape does not match saved render state");
    }
    if (!grad_alpha.empty()) {
        require(grad_alpha.height() == H && grad_alpha.width() == W && grad_alpha.channels() == 1,
                "render_backward: grad_alpha shape does not match saved render state");
    }

    struct Accum {
        Vec2 dmean2d = Vec2::Zero();
        Mat2 dconic = Mat2::Zero();
        Vec3 dcolor = Vec3::Zero();
        double dsigma = 0.0;
        double dz = 0.0;
    };

    const size_t n_proj = st.projected.size();
    const size_t n_tiles = st.bins.lists.size();
    int nblocks = parallel_blocks(n_tiles, st.options.threads);
    std::vector<std::vector<Accum>> block_accums(std::max(nblocks, 1),
                                                 std::vector<Accum>(n_proj));

    parallel_for_blocks(n_tiles, st.options.threads, [&](int block, size_t t_begin, size_t t_end) {
        std::vector<Accum>& acc = block_accums[block];
        for (size_t t = t_begin; t < t_end; ++t) {
            int tx = static_cast<int>(t % st.bins.tiles_x);
            int ty = static_cast<int>(t / st.bins.tiles_x);
            int px0 = tx * st.options.tile_size;
            int py0 = ty * st.options.tile_size;
            int px1 = std::min(px0 + st.options.tile_size, W);
            int py1 = std::min(py0 + st.options.tile_size, H);
            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    size_t pix = static_cast<size_t>(py) * W + px;
                    int32_t count = st.pixel_count[pix];
                    if (count == 0) continue;
                    int64_t off = st.pixel_offset[pix];
                    Vec3 gC = Vec3::Zero();
                    if (!grad_image.empty()) {
                        gC = Vec3(grad_image.at(py, px, 0), grad_image.at(py, px, 1),
                                  grad_image.at(py, px, 2));
                    }
                    double gD = grad_depth.empty() ? 0.0 : grad_depth.at(py, px, 0);
                    double gA = grad_alpha.empty() ? 0.0 : grad_alpha.at(py, px, 0);
                    if (gC.isZero(0.0) && gD == 0.0 && gA == 0.0) continue;

                    // Reverse walk with suffix sums of the downstream
                    // contributions; T_k is recovered by dividing the
                    // post-contributor transmittance by (1 - alpha_k).
                    Vec3 S_C = Vec3::Zero();
                    double S_D = 0.0, S_A = 0.0;
                    double T_next = st.final_transmittance[pix];
                    for (int k = count - 1; k >= 0; --k) {
                        const PixelContrib& pc = st.contribs[off + k];
                        const ProjectedGaussian& g = st.projected[pc.proj_index];
                        double alpha = pc.alpha;
                        double T_k = T_next / (1.0 - alpha);
                        double dalpha = T_k * (gC.dot(g.color) + gD * g.depth + gA) -
                                        (gC.dot(S_C) + gD * S_D + gA * S_A) / (1.0 - alpha);
                        Accum& a = acc[pc.proj_index];
                        a.dcolor += gC * (alpha * T_k);
                        a.dz += gD * alpha * T_k;
                        bool clamped = alpha >= st.options.alpha_clamp;
                        if (!clamped) {
                            a.dsigma += dalpha * alpha / g.sigma;
                            double dpower = dalpha * alpha;
                            Vec2 d(px + 0.5 - g.mean2d.x(), py + 0.5 - g.mean2d.y());
                            Vec2 qd = g.conic * d;
                            a.dmean2d += dpower * qd;
                            a.dconic += dpower * (-0.5) * (d * d.transpose());
                        }
                        S_C += g.color * (alpha * T_k);
                        S_D += g.depth * alpha * T_k;
                        S_A += alpha * T_k;
                        T_next = T_k;
                    }
                }
            }
        }
    });

    // Deterministic reduction in block order.
    std::vector<Accum>& acc = block_accums[0];
    for (int b = 1; b < nblocks; ++b) {
        for (size_t i = 0; i < n_proj; ++i) {
            acc[i].dmean2d += block_accums[b][i].dmean2d;
            acc[i].dconic += block_accums[b][i].dconic;
            acc[i].dcolor += block_accums[b][i].dcolor;
            acc[i].dsigma += block_accums[b][i].dsigma;
            acc[i].dz += block_accums[b][i].dz;
        }
    }

    RenderBackwardResult result;
    result.grads.resize_like(cloud);
    result.screen_grad_norm.assign(cloud.size(), 0.0);
    result.visible.assign(cloud.size(), 0);
    for (const auto& list : st.bins.lists) {
        for (int idx : list) result.visible[st.projected[idx].cloud_index] = 1;
    }

    parallel_for(n_proj, st.options.threads, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const ProjectedGaussian& g = st.projected[i];
            if (!g.in_frustum) continue;
            const Accum& a = acc[i];
            size_t ci = static_cast<size_t>(g.cloud_index);

            Mat2 dcov2d = -g.conic * a.dconic * g.conic;
            Vec3 dmu = Vec3::Zero();
            Mat3 dsigma3 = Mat3::Zero();
            project_gaussian_backward(g.proj_ctx, a.dmean2d, dcov2d, a.dz, &dmu, &dsigma3);
            build_covariance_backward(g.cov_ctx, dsigma3, &result.grads.rotations[ci],
                                      &result.grads.log_scales[ci]);

            Vec3 ddir = Vec3::Zero();
            sh_to_color_backward(g.sh_ctx, a.dcolor,
                                 result.grads.sh_coeffs.data() + ci * cloud.sh_stride(), &ddir);
            if (st.sh_degree >= 1 && g.view_vec.norm() > 1e-12) {
                dmu += normalize_backward(g.view_vec, ddir);
            }
            result.grads.positions[ci] += dmu;
            result.grads.opacity_logits[ci] += a.dsigma * g.sigma * (1.0 - g.sigma);
            result.screen_grad_norm[ci] = a.dmean2d.norm();
        }
    });
    return result;
}

}  // namespace fsplat
