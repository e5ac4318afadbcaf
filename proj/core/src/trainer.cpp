#include "fsplat/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "fsplat/adam.hpp"
#include "fsplat/deformation.hpp"
#include "fsplat/errors.hpp"
#include "fsplat/sh.hpp"
#include "fsplat/shf.hpp"

namespace fsplat {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

// 95th percentile of the positive, unmasked depth values; the depth residual
// is expressed in these units so delta stays scale-free.
double depth_percentile95(const Dataset& dataset) {
    std::vector<double> values;
    for (const FrameRecord& f : dataset.frames) {
        if (f.depth.empty()) continue;
        for (int y = 0; y < f.depth.height(); ++y) {
            for (int x = 0; x < f.depth.width(); ++x) {
                if (f.mask.at(y, x, 0) != 0.0) continue;
                double d = f.depth.at(y, x, 0);
                if (d > 0) values.push_back(d);
            }
        }
    }
    if (values.empty()) return 1.0;
    size_t k = static_cast<size_t>(0.95 * (values.size() - 1));
    std::nth_element(values.begin(), values.begin() + k, values.end());
    return std::max(values[k], 1e-9);
}

std::string serialize_rng(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::mt19937_64 deserialize_rng(const std::string& text) {
    std::mt19937_64 rng;
    std::istringstream is(text);
    is >> rng;
    if (!is) throw DataError("invalid rng state in checkpoint");
    return rng;
}

template <typename Fn>
void for_each_linear(DeformMlp& mlp, const DeformMlp& gm, DeformMlp& mm, DeformMlp& vm, Fn fn) {
    for (size_t i = 0; i < mlp.trunk.size(); ++i) {
        fn(mlp.trunk[i], gm.trunk[i], mm.trunk[i], vm.trunk[i]);
    }
    fn(mlp.head_position, gm.head_position, mm.head_position, vm.head_position);
    fn(mlp.head_log_scale, gm.head_log_scale, mm.head_log_scale, vm.head_log_scale);
    fn(mlp.head_rotation, gm.head_rotation, mm.head_rotation, vm.head_rotation);
    fn(mlp.head_sh, gm.head_sh, mm.head_sh, vm.head_sh);
    fn(mlp.head_opacity, gm.head_opacity, mm.head_opacity, vm.head_opacity);
}

}  // namespace

GaussianCloud init_from_depth(const Dataset& dataset, const TrainConfig& config) {
    require(!dataset.frames.empty(), "init_from_depth: empty dataset");
    const FrameRecord& f = dataset.frames.front();
    const Camera& cam = dataset.camera;
    GaussianCloud cloud;
    cloud.sh_degree = config.sh_degree;
    const bool have_depth = !f.depth.empty();
    const double fallback_z = std::sqrt(cam.near_plane * cam.far_plane);

    for (int y = 0; y < f.image.height(); y += config.init_stride) {
        for (int x = 0; x < f.image.width(); x += config.init_stride) {
            if (f.mask.at(y, x, 0) != 0.0) continue;
            double z = have_depth ? f.depth.at(y, x, 0) : fallback_z;
            if (z <= 0) continue;
            size_t i = cloud.size();
            cloud.resize(i + 1);
            cloud.positions[i] = cam.unproject(x + 0.5, y + 0.5, z);
            double scale = config.init_stride * z / cam.fx;
            cloud.log_scales[i] = Vec3::Constant(std::log(scale));
            cloud.opacity_logits[i] = logit(config.init_opacity);
            double* sh = cloud.sh_ptr(i);
            for (int c = 0; c < 3; ++c) sh[c] = (f.image.at(y, x, c) - 0.5) / kShC0;
        }
    }
    require(cloud.size() > 0, "init_from_depth: no usable pixels in frame 0");
    return cloud;
}

std::string loss_report_json(const LossReport& report) {
    nlohmann::json j;
    j["iteration"] = report.iteration;
    j["stage"] = report.stage;
    j["l1"] = report.l1;
    j["depth"] = report.depth;
    j["tv"] = report.tv;
    j["shf"] = report.shf;
    j["thf"] = report.thf;
    j["total"] = report.total;
    return j.dump();
}

Trainer::Trainer(const Dataset& dataset, const TrainConfig& config)
    : dataset_(&dataset), config_(config) {
    validate_train_config(config_);
    config_hash_ = train_config_hash(config_);
    rng_.seed(config_.seed);

    state_.cloud = init_from_depth(dataset, config_);
    state_.cloud_moments.resize_like(state_.cloud);
    state_.densify_stats.resize(state_.cloud.size());
    state_.camera = dataset.camera;
    state_.frame_count = dataset.frame_count();

    Vec3 bmin = state_.cloud.positions[0], bmax = state_.cloud.positions[0];
    for (const Vec3& p : state_.cloud.positions) {
        bmin = bmin.cwiseMin(p);
        bmax = bmax.cwiseMax(p);
    }
    state_.scene_extent = std::max((bmax - bmin).norm(), 1e-6);
    Vec3 margin = 0.15 * (bmax - bmin) + Vec3::Constant(0.1);

    HexPlaneConfig plane_cfg;
    plane_cfg.levels = config_.plane_levels;
    plane_cfg.base_spatial_res = config_.plane_base_spatial_res;
    plane_cfg.base_time_res = config_.plane_base_time_res;
    plane_cfg.level_scale = config_.plane_level_scale;
    plane_cfg.feature_width = config_.plane_feature_width;
    plane_cfg.init_scale = config_.plane_init_scale;
    state_.field.init(plane_cfg, config_.mlp_hidden_width, config_.mlp_hidden_layers,
                      bmin - margin, bmax + margin, state_.cloud.sh_stride(), config_.seed + 1);
    state_.field_m.zero_like(state_.field);
    state_.field_v.zero_like(state_.field);
    init_common();
}

Trainer::Trainer(const Dataset& dataset, const TrainConfig& config, TrainerState resume)
    : dataset_(&dataset), config_(config), state_(std::move(resume)) {
    validate_train_config(config_);
    config_hash_ = train_config_hash(config_);
    require(state_.frame_count == dataset.frame_count(),
            "resume: dataset frame count differs from checkpoint");
    require(state_.camera.width == dataset.camera.width &&
                state_.camera.height == dataset.camera.height,
            "resume: dataset dimensions differ from checkpoint");
    rng_ = deserialize_rng(state_.rng_state);
    init_common();
}

void Trainer::init_common() {
    render_options_ = RenderOptions{};
    render_options_.threads = config_.threads;

    depth_p95_ = depth_percentile95(*dataset_);
    if (config_.lambda_shf > 0) {
        shf_weights_.reserve(dataset_->frames.size());
        for (const FrameRecord& f : dataset_->frames) {
            shf_weights_.push_back(shf_weight_map(f.image, config_.shf_radius_ratio));
        }
    }

    LkOptions lk;
    lk.levels = config_.lk_levels;
    lk.window = config_.lk_window;
    lk.iterations = config_.lk_iterations;
    rendered_predictor_ = std::make_unique<LkFlowPredictor>(lk);
    if (config_.flow_predictor == "stored") {
        require(dataset_->has_gt_flow, "config requests the stored flow oracle but the dataset "
                                       "carries no flow/ directory");
        gt_predictor_ = std::make_unique<StoredFlowPredictor>(dataset_->gt_flows);
    } else {
        gt_predictor_ = std::make_unique<LkFlowPredictor>(lk);
    }
}

TrainerState Trainer::snapshot() const {
    TrainerState snap = state_;
    snap.rng_state = serialize_rng(rng_);
    return snap;
}

RenderOutput Trainer::render_frame(int frame_index) const {
    require(frame_index >= 0 && frame_index < state_.frame_count, "render_frame: index range");
    double t = static_cast<double>(frame_index) / state_.frame_count;
    if (state_.iteration > config_.static_iters) {
        GaussianCloud deformed = deform_cloud(state_.cloud, t, state_.field, nullptr,
                                              config_.threads);
        return render(deformed, dataset_->camera, render_options_, nullptr);
    }
    return render(state_.cloud, dataset_->camera, render_options_, nullptr);
}

void Trainer::update_cloud(const CloudGrads& grads) {
    state_.cloud_step += 1;
    const int64_t step = state_.cloud_step;
    const size_t n = state_.cloud.size();
    if (n == 0) return;
    double lr_pos = exp_lr(config_.lr_position, config_.lr_position_final, state_.iteration,
                           total_iterations());
    struct Group {
        const char* name;
        double* p;
        const double* g;
        double* m;
        double* v;
        size_t count;
        double lr;
    };
    CloudGrads& mm = state_.cloud_moments.m;
    CloudGrads& vv = state_.cloud_moments.v;
    const Group groups[] = {
        {"positions", state_.cloud.positions[0].data(), grads.positions[0].data(),
         mm.positions[0].data(), vv.positions[0].data(), 3 * n, lr_pos},
        {"rotations", state_.cloud.rotations[0].data(), grads.rotations[0].data(),
         mm.rotations[0].data(), vv.rotations[0].data(), 4 * n, config_.lr_rotation},
        {"log_scales", state_.cloud.log_scales[0].data(), grads.log_scales[0].data(),
         mm.log_scales[0].data(), vv.log_scales[0].data(), 3 * n, config_.lr_scale},
        {"opacity", state_.cloud.opacity_logits.data(), grads.opacity_logits.data(),
         mm.opacity_logits.data(), vv.opacity_logits.data(), n, config_.lr_opacity},
        {"sh", state_.cloud.sh_coeffs.data(), grads.sh_coeffs.data(), mm.sh_coeffs.data(),
         vv.sh_coeffs.data(), state_.cloud.sh_coeffs.size(), config_.lr_sh},
    };
    for (const Group& g : groups) {
        if (!adam_step(g.p, g.g, g.m, g.v, g.count, g.lr, step)) {
            std::cerr << "warning: non-finite gradient, skipping cloud group " << g.name
                      << " at iteration " << state_.iteration << "\n";
        }
    }
}

void Trainer::update_field(const DeformField& grad_field) {
    state_.field_step += 1;
    const int64_t step = state_.field_step;
    bool skipped = false;
    for (size_t l = 0; l < state_.field.planes.levels.size(); ++l) {
        for (int p = 0; p < 6; ++p) {
            PlaneGrid& params = state_.field.planes.levels[l][p];
            skipped |= !adam_step(params.data.data(), grad_field.planes.levels[l][p].data.data(),
                                  state_.field_m.planes.levels[l][p].data.data(),
                                  state_.field_v.planes.levels[l][p].data.data(),
                                  params.data.size(), config_.lr_planes, step);
        }
    }
    for_each_linear(state_.field.mlp, grad_field.mlp, state_.field_m.mlp, state_.field_v.mlp,
                    [&](Linear& param, const Linear& grad, Linear& m, Linear& v) {
                        skipped |= !adam_step(param.w.data(), grad.w.data(), m.w.data(),
                                              v.w.data(), param.w.size(), config_.lr_mlp, step);
                        skipped |= !adam_step(param.b.data(), grad.b.data(), m.b.data(),
                                              v.b.data(), param.b.size(), config_.lr_mlp, step);
                    });
    if (skipped) {
        std::cerr << "warning: non-finite gradient, skipped a field group at iteration "
                  << state_.iteration << "\n";
    }
}

void Trainer::maybe_densify() {
    bool active = state_.iteration <= config_.static_iters + config_.deform_iters / 2;
    if (!active || state_.iteration % config_.densify_interval != 0) return;
    DensifyConfig cfg;
    cfg.interval = config_.densify_interval;
    cfg.grad_threshold = config_.densify_grad_threshold;
    cfg.opacity_prune_threshold = config_.opacity_prune_threshold;
    cfg.scale_split_threshold = config_.scale_split_threshold * state_.scene_extent;
    cfg.max_gaussians = static_cast<size_t>(config_.max_gaussians);
    densify_and_prune(state_.cloud, state_.densify_stats, state_.cloud_moments, cfg, rng_);
}

LossReport Trainer::step(StepDebug* debug) { return step_impl(debug); }

LossReport Trainer::step_impl(StepDebug* debug) {
    require(!finished(), "step: training already finished");
    const int64_t k = state_.iteration;  // 0-based position of this step
    const bool stage2 = k >= config_.static_iters;
    const int T = state_.frame_count;
    const int frame = static_cast<int>(k % T);
    const int prev = frame == 0 ? 0 : frame - 1;
    const FrameRecord& rec = dataset_->frames[frame];
    const FrameRecord& rec_prev = dataset_->frames[prev];
    const double t = static_cast<double>(frame) / T;
    const double t_prev = static_cast<double>(prev) / T;

    // Forward: deform (stage 2) and render the supervised frame, plus the
    // previous frame when the temporal term is active.
    DeformContext ctx_cur, ctx_prev;
    GaussianCloud cloud_cur, cloud_prev;
    const GaussianCloud* render_cloud = &state_.cloud;
    if (stage2) {
        cloud_cur = deform_cloud(state_.cloud, t, state_.field, &ctx_cur, config_.threads);
        render_cloud = &cloud_cur;
    }
    RenderSavedState saved_cur;
    RenderOutput out_cur = render(*render_cloud, dataset_->camera, render_options_, &saved_cur);

    const bool thf_active = stage2 && config_.lambda_thf > 0;
    const bool reuse_prev = frame == 0;
    RenderSavedState saved_prev;
    RenderOutput out_prev;
    const GaussianCloud* render_cloud_prev = nullptr;
    if (thf_active && !reuse_prev) {
        cloud_prev = deform_cloud(state_.cloud, t_prev, state_.field, &ctx_prev, config_.threads);
        render_cloud_prev = &cloud_prev;
        out_prev = render(cloud_prev, dataset_->camera, render_options_, &saved_prev);
    }

    ObjectiveOptions options;
    options.weights = config_.weights();
    options.shf_radius_ratio = config_.shf_radius_ratio;
    options.depth_delta = config_.depth_delta;
    options.depth_p95 = depth_p95_;
    options.depth_alpha_min = config_.depth_alpha_min;
    options.thf.charbonnier_eps = config_.charbonnier_eps;
    options.thf.census.window = config_.census_window;
    options.enable_depth = !rec.depth.empty();
    options.enable_shf = true;
    options.enable_thf = thf_active;
    options.enable_tv = stage2;

    ThfFrameInputs thf_inputs;
    if (thf_active) {
        thf_inputs.enabled = true;
        thf_inputs.rendered_prev = reuse_prev ? &out_cur.image : &out_prev.image;
        thf_inputs.gt_prev = &rec_prev.image;
        thf_inputs.mask_prev = &rec_prev.mask;
        thf_inputs.pair_index = frame;
        thf_inputs.rendered_predictor = rendered_predictor_.get();
        thf_inputs.gt_predictor = gt_predictor_.get();
    }

    const Image* weights = config_.lambda_shf > 0 ? &shf_weights_[frame] : nullptr;
    ObjectiveResult obj = total_loss(rec.image, rec.depth, rec.mask, out_cur.image, out_cur.depth,
                                     out_cur.alpha, weights, stage2 ? &state_.field.planes : nullptr,
                                     thf_inputs, options);

    // Backward through the renderer(s), then the field.
    RenderBackwardResult back_cur = render_backward(*render_cloud, obj.grad_image, obj.grad_depth,
                                                    obj.grad_alpha, saved_cur);
    if (debug) {
        debug->screen_grad_norm = back_cur.screen_grad_norm;
        debug->visible = back_cur.visible;
        debug->mean2d.clear();
        debug->in_frustum.clear();
        for (const ProjectedGaussian& p : saved_cur.projected) {
            debug->mean2d.push_back(p.mean2d);
            debug->in_frustum.push_back(p.in_frustum ? 1 : 0);
        }
    }
    state_.densify_stats.accumulate(back_cur.screen_grad_norm, back_cur.visible);

    CloudGrads cloud_grads;
    DeformField field_grads;
    if (stage2) {
        cloud_grads.resize_like(state_.cloud);
        field_grads.zero_like(state_.field);
        deform_cloud_backward(state_.cloud, state_.field, ctx_cur, back_cur.grads, &cloud_grads,
                              &field_grads, config_.threads);
        if (thf_active && !obj.grad_image_prev.empty()) {
            if (reuse_prev) {
                RenderBackwardResult back_prev = render_backward(*render_cloud,
                                                                 obj.grad_image_prev, Image(),
                                                                 Image(), saved_cur);
                state_.densify_stats.accumulate(back_prev.screen_grad_norm, back_prev.visible);
                deform_cloud_backward(state_.cloud, state_.field, ctx_cur, back_prev.grads,
                                      &cloud_grads, &field_grads, config_.threads);
            } else {
                RenderBackwardResult back_prev = render_backward(*render_cloud_prev,
                                                                 obj.grad_image_prev, Image(),
                                                                 Image(), saved_prev);
                state_.densify_stats.accumulate(back_prev.screen_grad_norm, back_prev.visible);
                deform_cloud_backward(state_.cloud, state_.field, ctx_prev, back_prev.grads,
                                      &cloud_grads, &field_grads, config_.threads);
            }
        }
        if (obj.has_tv) {
            for (size_t l = 0; l < field_grads.planes.levels.size(); ++l) {
                for (int p = 0; p < 6; ++p) {
                    auto& dst = field_grads.planes.levels[l][p].data;
                    const auto& src = obj.tv_grads.levels[l][p].data;
                    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                }
            }
        }
    } else {
        cloud_grads = std::move(back_cur.grads);
    }

    state_.iteration += 1;
    state_.stage = stage2 ? 2 : 1;  // checkpoints must be renderable standalone
    update_cloud(cloud_grads);
    if (stage2) update_field(field_grads);
    maybe_densify();

    LossReport report = obj.report;
    report.iteration = static_cast<int>(state_.iteration);
    report.stage = stage2 ? "deform" : "static";
    return report;
}

void Trainer::run(const std::string& checkpoint_path,
                  const std::function<void(const LossReport&)>& sink,
                  const std::atomic<bool>* stop) {
    CheckpointWriter writer;
    while (!finished()) {
        if (stop && stop->load()) break;
        LossReport report = step();
        if (sink) sink(report);
        if (!checkpoint_path.empty() && state_.iteration % config_.checkpoint_interval == 0 &&
            !finished()) {
            writer.write(checkpoint_path, snapshot(), config_hash_);
        }
    }
    if (!checkpoint_path.empty()) {
        writer.write(checkpoint_path, snapshot(), config_hash_);
        writer.wait();
    }
}

}  // namespace fsplat
