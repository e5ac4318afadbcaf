#include "fsplat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "fsplat/deformation.hpp"
#include "fsplat/errors.hpp"
#include "fsplat/objective.hpp"
#include "fsplat/rasterizer.hpp"
#include "fsplat/shf.hpp"
#include "fsplat/thf.hpp"

namespace fsplat {

namespace {

constexpr double kAtol = 1e-7;

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}
double logit(double p) { return std::log(p / (1.0 - p)); }

class Checker {
  public:
    Checker(const GradCheckOptions& options, std::vector<GradCheckEntry>& out)
        : options_(options), out_(out) {}

    // Central differences over up to max_coords evenly spaced coordinates of
    // one parameter group. params aliases live scenario state; eval() must
    // recompute the scalar loss from that state.
    void check_group(const std::string& module, const std::string& group, double* params,
                     const double* analytic, size_t n, double rel_tol,
                     const std::function<double()>& eval, size_t max_coords = SIZE_MAX) {
        GradCheckEntry entry;
        entry.module = module;
        entry.group = group;
        entry.rel_tol = rel_tol;
        const bool flip = !options_.inject_sign_error.empty() &&
                          entry.full_name().find(options_.inject_sign_error) != std::string::npos;
        const double h = options_.step;
        size_t stride = n > max_coords ? (n + max_coords - 1) / max_coords : 1;
        for (size_t i = 0; i < n; i += stride) {
            double saved = params[i];
            params[i] = saved + h;
            double lp = eval();
            params[i] = saved - h;
            double lm = eval();
            params[i] = saved;
            double numeric = (lp - lm) / (2 * h);
            double a = flip ? -analytic[i] : analytic[i];
            double diff = std::abs(a - numeric);
            double scale = std::max(std::abs(a), std::abs(numeric));
            if (diff > entry.max_abs_diff) {
                entry.max_abs_diff = diff;
                entry.analytic_at_worst = a;
                entry.numeric_at_worst = numeric;
            }
            double rel = diff / std::max(scale, 1e-12);
            if (scale > kAtol) entry.max_rel_err = std::max(entry.max_rel_err, rel);
            if (diff > kAtol + rel_tol * scale) entry.pass = false;
            ++entry.checked;
        }
        out_.push_back(entry);
    }

  private:
    const GradCheckOptions& options_;
    std::vector<GradCheckEntry>& out_;
};

// Image-space linear functional with fixed random coefficients; its gradient
// with respect to the image is the coefficient field itself.
Image random_weights(int h, int w, int c, std::mt19937_64& rng) {
    Image img(h, w, c);
    for (size_t i = 0; i < img.size(); ++i) img.raw()[i] = uniform(rng, -1.0, 1.0);
    return img;
}

double dot(const Image& a, const Image& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.raw()[i] * b.raw()[i];
    return s;
}

Camera small_camera(int size) {
    Camera cam;
    cam.width = size;
    cam.height = size;
    cam.fx = cam.fy = size * 1.2;
    cam.cx = cam.cy = size / 2.0;
    cam.near_plane = 0.1;
    cam.far_plane = 10.0;
    return cam;
}

GaussianCloud random_cloud(const Camera& cam, int n, int sh_degree, std::mt19937_64& rng) {
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    cloud.resize(n);
    for (int i = 0; i < n; ++i) {
        double px = uniform(rng, 0.2, 0.8) * cam.width;
        double py = uniform(rng, 0.2, 0.8) * cam.height;
        double z = uniform(rng, 0.8, 1.6);
        cloud.positions[i] = cam.unproject(px, py, z);
        double scale_px = uniform(rng, 1.0, 2.5);
        cloud.log_scales[i] = Vec3(std::log(scale_px * z / cam.fx) + uniform(rng, -0.2, 0.2),
                                   std::log(scale_px * z / cam.fx) + uniform(rng, -0.2, 0.2),
                                   std::log(scale_px * z / cam.fx) + uniform(rng, -0.2, 0.2));
        Vec4 q(uniform(rng, 0.5, 1.0), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3),
               uniform(rng, -0.3, 0.3));
        cloud.rotations[i] = q;
        cloud.opacity_logits[i] = logit(uniform(rng, 0.3, 0.9));
        double* sh = cloud.sh_ptr(i);
        for (int c = 0; c < 3; ++c) sh[c] = (uniform(rng, 0.2, 0.8) - 0.5) / 0.28209479177387814;
        for (int c = 3; c < cloud.sh_stride(); ++c) sh[c] = uniform(rng, -0.2, 0.2);
    }
    return cloud;
}

// Cutoffs off: the support ellipse and the transmittance stop are exact
// optimizations, not differentiable ones, so the checked function must be the
// smooth blending sum.
RenderOptions gradcheck_render_options() {
    RenderOptions opts;
    opts.sigma_cutoff = 0.0;
    opts.transmittance_eps = 0.0;
    opts.threads = 1;
    return opts;
}

void check_rasterizer_scene(const std::string& group_prefix, int n_gaussians, double rel_tol,
                            Checker& checker, std::mt19937_64& rng) {
    Camera cam = small_camera(12);
    GaussianCloud cloud = random_cloud(cam, n_gaussians, 1, rng);
    RenderOptions opts = gradcheck_render_options();
    Image wi = random_weights(cam.height, cam.width, 3, rng);
    Image wd = random_weights(cam.height, cam.width, 1, rng);
    Image wa = random_weights(cam.height, cam.width, 1, rng);

    auto eval = [&]() {
        RenderOutput out = render(cloud, cam, opts, nullptr);
        return dot(out.image, wi) + dot(out.depth, wd) + dot(out.alpha, wa);
    };
    RenderSavedState saved;
    render(cloud, cam, opts, &saved);
    RenderBackwardResult back = render_backward(cloud, wi, wd, wa, saved);

    size_t n = cloud.size();
    checker.check_group("rasterizer", group_prefix + "positions", cloud.positions[0].data(),
                        back.grads.positions[0].data(), 3 * n, rel_tol, eval);
    checker.check_group("rasterizer", group_prefix + "rotations", cloud.rotations[0].data(),
                        back.grads.rotations[0].data(), 4 * n, rel_tol, eval);
    checker.check_group("rasterizer", group_prefix + "log_scales", cloud.log_scales[0].data(),
                        back.grads.log_scales[0].data(), 3 * n, rel_tol, eval);
    checker.check_group("rasterizer", group_prefix + "opacity", cloud.opacity_logits.data(),
                        back.grads.opacity_logits.data(), n, rel_tol, eval);
    checker.check_group("rasterizer", group_prefix + "sh", cloud.sh_coeffs.data(),
                        back.grads.sh_coeffs.data(), cloud.sh_coeffs.size(), rel_tol, eval);
}

void check_rasterizer(Checker& checker, uint64_t seed) {
    std::mt19937_64 rng(seed);
    check_rasterizer_scene("single.", 1, 1e-4, checker, rng);
    check_rasterizer_scene("multi.", 10, 1e-3, checker, rng);
}

struct DeformScene {
    GaussianCloud cloud;
    DeformField field;
    double t = 0.4;
};

DeformScene random_deform_scene(std::mt19937_64& rng, int n_gaussians) {
    DeformScene scene;
    Camera cam = small_camera(10);
    scene.cloud = random_cloud(cam, n_gaussians, 0, rng);

    HexPlaneConfig cfg;
    cfg.levels = 2;
    cfg.base_spatial_res = 4;
    cfg.base_time_res = 3;
    cfg.level_scale = 2;
    cfg.feature_width = 2;
    Vec3 bmin(-2, -2, 0), bmax(2, 2, 3);
    scene.field.init(cfg, 8, 1, bmin, bmax, scene.cloud.sh_stride(),
                     static_cast<uint64_t>(rng()));

    // Heads initialize to zero; perturb everything so every path carries
    // signal through the check.
    for (auto& level : scene.field.planes.levels) {
        for (PlaneGrid& p : level) {
            for (double& v : p.data) v += uniform(rng, -0.4, 0.4);
        }
    }
    auto jitter = [&rng](Linear& l) {
        for (double& v : l.w) v += uniform(rng, -0.3, 0.3);
        for (double& v : l.b) v += uniform(rng, -0.1, 0.1);
    };
    for (Linear& l : scene.field.mlp.trunk) jitter(l);
    jitter(scene.field.mlp.head_position);
    jitter(scene.field.mlp.head_log_scale);
    jitter(scene.field.mlp.head_rotation);
    jitter(scene.field.mlp.head_sh);
    jitter(scene.field.mlp.head_opacity);
    return scene;
}

void check_field_groups(const std::string& module, const std::string& prefix, DeformScene& scene,
                        const DeformField& grad_field, const CloudGrads& grad_cloud,
                        double rel_tol, const std::function<double()>& eval, Checker& checker,
                        size_t max_plane_coords) {
    for (size_t l = 0; l < scene.field.planes.levels.size(); ++l) {
        for (int p = 0; p < 6; ++p) {
            PlaneGrid& grid = scene.field.planes.levels[l][p];
            const PlaneGrid& ggrid = grad_field.planes.levels[l][p];
            checker.check_group(module,
                                prefix + "planes.l" + std::to_string(l) + "p" + std::to_string(p),
                                grid.data.data(), ggrid.data.data(), grid.data.size(), rel_tol,
                                eval, max_plane_coords);
        }
    }
    Linear& trunk0 = scene.field.mlp.trunk[0];
    checker.check_group(module, prefix + "mlp.trunk.w", trunk0.w.data(),
                        grad_field.mlp.trunk[0].w.data(), trunk0.w.size(), rel_tol, eval, 40);
    checker.check_group(module, prefix + "mlp.trunk.b", trunk0.b.data(),
                        grad_field.mlp.trunk[0].b.data(), trunk0.b.size(), rel_tol, eval);
    checker.check_group(module, prefix + "mlp.head_position.w",
                        scene.field.mlp.head_position.w.data(),
                        grad_field.mlp.head_position.w.data(),
                        scene.field.mlp.head_position.w.size(), rel_tol, eval, 24);
    checker.check_group(module, prefix + "mlp.head_rotation.w",
                        scene.field.mlp.head_rotation.w.data(),
                        grad_field.mlp.head_rotation.w.data(),
                        scene.field.mlp.head_rotation.w.size(), rel_tol, eval, 24);
    checker.check_group(module, prefix + "mlp.head_opacity.b",
                        scene.field.mlp.head_opacity.b.data(),
                        grad_field.mlp.head_opacity.b.data(),
                        scene.field.mlp.head_opacity.b.size(), rel_tol, eval);
    size_t n = scene.cloud.size();
    checker.check_group(module, prefix + "cloud.positions", scene.cloud.positions[0].data(),
                        grad_cloud.positions[0].data(), 3 * n, rel_tol, eval);
    checker.check_group(module, prefix + "cloud.rotations", scene.cloud.rotations[0].data(),
                        grad_cloud.rotations[0].data(), 4 * n, rel_tol, eval);
    checker.check_group(module, prefix + "cloud.log_scales", scene.cloud.log_scales[0].data(),
                        grad_cloud.log_scales[0].data(), 3 * n, rel_tol, eval);
    checker.check_group(module, prefix + "cloud.opacity", scene.cloud.opacity_logits.data(),
                        grad_cloud.opacity_logits.data(), n, rel_tol, eval);
    checker.check_group(module, prefix + "cloud.sh", scene.cloud.sh_coeffs.data(),
                        grad_cloud.sh_coeffs.data(), scene.cloud.sh_coeffs.size(), rel_tol, eval);
}

// Direct functional of the deformed parameters: isolates the field backward
// from the renderer.
void check_deformation(Checker& checker, uint64_t seed) {
    std::mt19937_64 rng(seed + 1);
    DeformScene scene = random_deform_scene(rng, 6);

    GaussianCloud probe = deform_cloud(scene.cloud, scene.t, scene.field, nullptr);
    CloudGrads w;
    w.resize_like(probe);
    for (size_t i = 0; i < probe.size(); ++i) {
        for (int c = 0; c < 3; ++c) w.positions[i][c] = uniform(rng, -1, 1);
        for (int c = 0; c < 4; ++c) w.rotations[i][c] = uniform(rng, -1, 1);
        for (int c = 0; c < 3; ++c) w.log_scales[i][c] = uniform(rng, -1, 1);
        w.opacity_logits[i] = uniform(rng, -1, 1);
    }
    for (size_t i = 0; i < w.sh_coeffs.size(); ++i) w.sh_coeffs[i] = uniform(rng, -1, 1);

    auto eval = [&]() {
        GaussianCloud d = deform_cloud(scene.cloud, scene.t, scene.field, nullptr);
        double s = 0.0;
        for (size_t i = 0; i < d.size(); ++i) {
            s += w.positions[i].dot(d.positions[i]) + w.rotations[i].dot(d.rotations[i]) +
                 w.log_scales[i].dot(d.log_scales[i]) + w.opacity_logits[i] * d.opacity_logits[i];
        }
        for (size_t i = 0; i < d.sh_coeffs.size(); ++i) s += w.sh_coeffs[i] * d.sh_coeffs[i];
        return s;
    };

    DeformContext ctx;
    deform_cloud(scene.cloud, scene.t, scene.field, &ctx);
    CloudGrads grad_cloud;
    DeformField grad_field;
    grad_cloud.resize_like(scene.cloud);
    grad_field.zero_like(scene.field);
    deform_cloud_backward(scene.cloud, scene.field, ctx, w, &grad_cloud, &grad_field);

    check_field_groups("deformation", "", scene, grad_field, grad_cloud, 1e-4, eval, checker, 60);

    // Same chain driven through the renderer, validating the glue between
    // render_backward's cloud gradients and the field backward.
    DeformScene pipe = random_deform_scene(rng, 5);
    Camera cam = small_camera(10);
    RenderOptions opts = gradcheck_render_options();
    Image wi = random_weights(cam.height, cam.width, 3, rng);
    Image wd = random_weights(cam.height, cam.width, 1, rng);
    auto pipe_eval = [&]() {
        GaussianCloud d = deform_cloud(pipe.cloud, pipe.t, pipe.field, nullptr);
        RenderOutput out = render(d, cam, opts, nullptr);
        return dot(out.image, wi) + dot(out.depth, wd);
    };
    DeformContext pipe_ctx;
    GaussianCloud deformed = deform_cloud(pipe.cloud, pipe.t, pipe.field, &pipe_ctx);
    RenderSavedState saved;
    render(deformed, cam, opts, &saved);
    RenderBackwardResult back = render_backward(deformed, wi, wd, Image(), saved);
    CloudGrads pipe_grad_cloud;
    DeformField pipe_grad_field;
    pipe_grad_cloud.resize_like(pipe.cloud);
    pipe_grad_field.zero_like(pipe.field);
    deform_cloud_backward(pipe.cloud, pipe.field, pipe_ctx, back.grads, &pipe_grad_cloud,
                          &pipe_grad_field);
    check_field_groups("deformation", "pipeline.", pipe, pipe_grad_field, pipe_grad_cloud, 1e-3,
                       pipe_eval, checker, 24);
}

void check_shf(Checker& checker, uint64_t seed) {
    std::mt19937_64 rng(seed + 2);
    Image gt = random_weights(12, 12, 3, rng);
    for (size_t i = 0; i < gt.size(); ++i) gt.raw()[i] = 0.5 + 0.4 * gt.raw()[i];
    Image rendered = gt;
    // Residuals bounded away from the |.| kink so the step never crosses it.
    for (size_t i = 0; i < rendered.size(); ++i) {
        double s = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        rendered.raw()[i] += s * uniform(rng, 0.05, 0.3);
    }
    Image weights = shf_weight_map(gt, 0.25);
    auto eval = [&]() { return shf_loss_with_weights(weights, gt, rendered).loss; };
    ShfResult res = shf_loss_with_weights(weights, gt, rendered);
    checker.check_group("shf", "rendered", rendered.data(), res.grad_rendered.data(),
                        rendered.size(), 1e-4, eval);
}

struct ThfScene {
    Image rendered_cur, rendered_prev, gt_cur, gt_prev, mask_cur, mask_prev;
    LkFlowPredictor predictor;
    ThfConfig config;
};

ThfScene random_thf_scene(std::mt19937_64& rng, int size) {
    ThfScene scene;
    scene.gt_prev = Image(size, size, 3);
    for (size_t i = 0; i < scene.gt_prev.size(); ++i) {
        scene.gt_prev.raw()[i] = 0.5 + 0.35 * uniform(rng, -1, 1);
    }
    // A slightly shifted, lightly reshaded variant keeps the LK solve in a
    // well-conditioned regime with non-integer flow.
    scene.gt_cur = Image(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            int xs = std::max(0, x - 1);
            for (int c = 0; c < 3; ++c) {
                double v = 0.7 * scene.gt_prev.at(y, xs, c) + 0.3 * scene.gt_prev.at(y, x, c);
                scene.gt_cur.at(y, x, c) = v + 0.02 * uniform(rng, -1, 1);
            }
        }
    }
    auto perturb = [&rng](const Image& src) {
        Image out = src;
        for (size_t i = 0; i < out.size(); ++i) out.raw()[i] += 0.05 * uniform(rng, -1, 1);
        return out;
    };
    scene.rendered_prev = perturb(scene.gt_prev);
    scene.rendered_cur = perturb(scene.gt_cur);
    scene.mask_cur = Image(size, size, 1, 0.0);
    scene.mask_prev = Image(size, size, 1, 0.0);
    scene.mask_cur.at(1, 1, 0) = 1.0;
    scene.mask_prev.at(2, 2, 0) = 1.0;
    return scene;
}

void check_thf(Checker& checker, uint64_t seed) {
    std::mt19937_64 rng(seed + 3);
    ThfScene scene = random_thf_scene(rng, 16);
    auto eval = [&]() {
        return thf_loss(scene.rendered_cur, scene.rendered_prev, scene.gt_cur, scene.gt_prev,
                        scene.mask_cur, scene.mask_prev, 1, scene.predictor, scene.predictor,
                        scene.config, false)
            .loss;
    };
    ThfResult res = thf_loss(scene.rendered_cur, scene.rendered_prev, scene.gt_cur, scene.gt_prev,
                             scene.mask_cur, scene.mask_prev, 1, scene.predictor, scene.predictor,
                             scene.config, true);
    checker.check_group("thf", "rendered_cur", scene.rendered_cur.data(),
                        res.grad_rendered_cur.data(), scene.rendered_cur.size(), 1e-3, eval, 90);
    checker.check_group("thf", "rendered_prev", scene.rendered_prev.data(),
                        res.grad_rendered_prev.data(), scene.rendered_prev.size(), 1e-3, eval, 90);
}

void check_objective(Checker& checker, uint64_t seed) {
    std::mt19937_64 rng(seed + 4);
    const int size = 12;
    ThfScene pair = random_thf_scene(rng, size);

    Image gt_image = pair.gt_cur;
    Image rendered_image = pair.rendered_cur;
    // Push every color residual away from the L1 kink.
    for (size_t i = 0; i < rendered_image.size(); ++i) {
        double r = rendered_image.raw()[i] - gt_image.raw()[i];
        double s = r >= 0 ? 1.0 : -1.0;
        if (std::abs(r) < 0.03) rendered_image.raw()[i] = gt_image.raw()[i] + s * 0.03;
    }
    Image gt_depth(size, size, 1), rendered_depth(size, size, 1), rendered_alpha(size, size, 1);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double d = uniform(rng, 0.6, 1.8);
            double a = uniform(rng, 0.6, 0.95);
            gt_depth.at(y, x, 0) = d;
            rendered_alpha.at(y, x, 0) = a;
            // Half the pixels sit in the quadratic huber region, half in the
            // linear one, all clear of the delta boundary.
            double r = (uniform01(rng) < 0.5 ? uniform(rng, 0.03, 0.14) : uniform(rng, 0.26, 0.4));
            if (uniform01(rng) < 0.5) r = -r;
            rendered_depth.at(y, x, 0) = d * a + r;  // depth_p95 = 1
        }
    }
    Image mask(size, size, 1, 0.0);
    mask.at(0, 3, 0) = 1.0;

    HexPlaneConfig cfg;
    cfg.levels = 1;
    cfg.base_spatial_res = 3;
    cfg.base_time_res = 3;
    cfg.feature_width = 2;
    HexPlanes planes;
    planes.init(cfg, Vec3(-1, -1, -1), Vec3(1, 1, 1), seed + 7);
    for (auto& level : planes.levels) {
        for (PlaneGrid& p : level) {
            for (double& v : p.data) v += uniform(rng, -0.3, 0.3);
        }
    }

    ObjectiveOptions options;
    options.enable_depth = options.enable_shf = options.enable_thf = options.enable_tv = true;
    options.depth_p95 = 1.0;
    Image shf_weights = shf_weight_map(gt_image, options.shf_radius_ratio);

    ThfFrameInputs thf_inputs;
    thf_inputs.enabled = true;
    thf_inputs.rendered_prev = &pair.rendered_prev;
    thf_inputs.gt_prev = &pair.gt_prev;
    thf_inputs.mask_prev = &pair.mask_prev;
    thf_inputs.pair_index = 1;
    thf_inputs.rendered_predictor = &pair.predictor;
    thf_inputs.gt_predictor = &pair.predictor;

    auto eval = [&]() {
        return total_loss(gt_image, gt_depth, mask, rendered_image, rendered_depth, rendered_alpha,
                          &shf_weights, &planes, thf_inputs, options)
            .report.total;
    };
    ObjectiveResult res = total_loss(gt_image, gt_depth, mask, rendered_image, rendered_depth,
                                     rendered_alpha, &shf_weights, &planes, thf_inputs, options);

    checker.check_group("objective", "rendered_image", rendered_image.data(), res.grad_image.data(),
                        rendered_image.size(), 1e-3, eval, 90);
    checker.check_group("objective", "rendered_depth", rendered_depth.data(), res.grad_depth.data(),
                        rendered_depth.size(), 1e-3, eval, 60);
    checker.check_group("objective", "rendered_alpha", rendered_alpha.data(), res.grad_alpha.data(),
                        rendered_alpha.size(), 1e-3, eval, 60);
    checker.check_group("objective", "rendered_prev", pair.rendered_prev.data(),
                        res.grad_image_prev.data(), pair.rendered_prev.size(), 1e-3, eval, 60);
    PlaneGrid& tvp = planes.levels[0][0];
    checker.check_group("objective", "tv_planes", tvp.data.data(),
                        res.tv_grads.levels[0][0].data.data(), tvp.data.size(), 1e-3, eval);
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& options) {
    static const std::vector<std::string> kModules = {"rasterizer", "deformation", "shf", "thf",
                                                      "objective"};
    if (!options.module.empty() &&
        std::find(kModules.begin(), kModules.end(), options.module) == kModules.end()) {
        std::string names;
        for (const auto& m : kModules) names += (names.empty() ? "" : ", ") + m;
        throw ConfigError("unknown gradcheck module '" + options.module + "'; valid: " + names);
    }
    auto enabled = [&](const char* m) { return options.module.empty() || options.module == m; };

    std::vector<GradCheckEntry> entries;
    Checker checker(options, entries);
    if (enabled("rasterizer")) check_rasterizer(checker, options.seed);
    if (enabled("deformation")) check_deformation(checker, options.seed);
    if (enabled("shf")) check_shf(checker, options.seed);
    if (enabled("thf")) check_thf(checker, options.seed);
    if (enabled("objective")) check_objective(checker, options.seed);
    return entries;
}

bool gradcheck_all_pass(const std::vector<GradCheckEntry>& entries) {
    for (const GradCheckEntry& e : entries) {
        if (!e.pass) return false;
    }
    return !entries.empty();
}

}  // namespace fsplat
