#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fsplat/checkpoint.hpp"
#include "fsplat/dataset.hpp"
#include "fsplat/rasterizer.hpp"
#include "fsplat/thf.hpp"
#include "fsplat/train_config.hpp"

namespace fsplat {

// Back-projects every init_stride-th unmasked depth pixel of frame 0 into a
// degree-config.sh_degree gaussian with isotropic scale covering the sampling
// gap. Datasets without depth fall back to a fixed-depth sheet.
GaussianCloud init_from_depth(const Dataset& dataset, const TrainConfig& config);

// One line of the training log; doubles keep their shortest round-trip form
// so equal runs emit byte-identical records.
std::string loss_report_json(const LossReport& report);

// Per-step introspection for experiments: screen-space positional gradient
// statistics of the current-frame render.
struct StepDebug {
    std::vector<double> screen_grad_norm;
    std::vector<uint8_t> visible;
    std::vector<Vec2> mean2d;
    std::vector<uint8_t> in_frustum;
};

// Two-stage optimizer. Stage 1 fits the static cloud with L1 + depth + SHF;
// stage 2 adds the deformation field, THF, and TV. Densification runs through
// stage 1 and the first half of stage 2. Deterministic for a fixed seed and
// thread count.
class Trainer {
  public:
    Trainer(const Dataset& dataset, const TrainConfig& config);
    Trainer(const Dataset& dataset, const TrainConfig& config, TrainerState resume);

    LossReport step(StepDebug* debug = nullptr);

    // Runs to completion (or until *stop), checkpointing every
    // checkpoint_interval iterations when checkpoint_path is non-empty.
    void run(const std::string& checkpoint_path, const std::function<void(const LossReport&)>& sink,
             const std::atomic<bool>* stop = nullptr);

    int64_t total_iterations() const {
        return config_.static_iters + static_cast<int64_t>(config_.deform_iters);
    }
    int64_t iteration() const { return state_.iteration; }
    bool finished() const { return state_.iteration >= total_iterations(); }

    TrainerState snapshot() const;
    const TrainerState& state() const { return state_; }
    const TrainConfig& config() const { return config_; }
    uint64_t config_hash() const { return config_hash_; }

    // Deforms (stage 2 onward) and renders the cloud at frame_index's time.
    RenderOutput render_frame(int frame_index) const;

  private:
    void init_common();
    LossReport step_impl(StepDebug* debug);
    void update_cloud(const CloudGrads& grads);
    void update_field(const DeformField& grad_field);
    void maybe_densify();

    const Dataset* dataset_;
    TrainConfig config_;
    uint64_t config_hash_ = 0;
    TrainerState state_;
    std::mt19937_64 rng_;
    RenderOptions render_options_;
    std::vector<Image> shf_weights_;
    double depth_p95_ = 1.0;
    std::unique_ptr<FlowPredictor> rendered_predictor_;
    std::unique_ptr<FlowPredictor> gt_predictor_;
};

}  // namespace fsplat
