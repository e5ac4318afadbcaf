#pragma once

#include <cstdint>
#include <string>

#include "fsplat/objective.hpp"

namespace fsplat {

// Flat, fully serializable training configuration. Every field round-trips
// through the JSON schema; unknown keys are rejected by name.
struct TrainConfig {
    // stages
    int static_iters = 3000;
    int deform_iters = 60000;

    // learning rates per parameter group
    double lr_position = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_rotation = 1e-3;
    double lr_scale = 5e-3;
    double lr_opacity = 5e-2;
    double lr_sh = 2.5e-3;
    double lr_planes = 1.6e-2;
    double lr_mlp = 1.6e-3;

    // densification
    int densify_interval = 100;
    double densify_grad_threshold = 2e-4;
    double opacity_prune_threshold = 0.005;
    double scale_split_threshold = 0.01;  // fraction of the scene extent
    int max_gaussians = 200000;

    // loss weights and shaping
    double lambda_d = LossWeights{}.lambda_d;
    double lambda_tv = LossWeights{}.lambda_tv;
    double lambda_shf = LossWeights{}.lambda_shf;
    double lambda_thf = LossWeights{}.lambda_thf;
    double shf_radius_ratio = 0.25;
    double depth_delta = 0.2;
    double depth_alpha_min = 0.5;

    // flow
    std::string flow_predictor = "lk";  // lk | stored (synthetic GT oracle)
    int lk_levels = 3;
    int lk_window = 7;
    int lk_iterations = 3;
    double charbonnier_eps = 1e-3;
    int census_window = 7;

    // deformation field
    int plane_levels = 2;
    int plane_base_spatial_res = 32;
    int plane_base_time_res = 16;
    int plane_level_scale = 2;
    int plane_feature_width = 16;
    double plane_init_scale = 1e-2;
    int mlp_hidden_width = 64;
    int mlp_hidden_layers = 2;

    // initialization
    int init_stride = 4;
    double init_opacity = 0.1;
    int sh_degree = 0;

    // run
    int checkpoint_interval = 1000;
    int threads = 1;
    uint64_t seed = 42;

    LossWeights weights() const {
        LossWeights w;
        w.lambda_d = lambda_d;
        w.lambda_tv = lambda_tv;
        w.lambda_shf = lambda_shf;
        w.lambda_thf = lambda_thf;
        return w;
    }
};

// Strict parse: unknown or mistyped fields raise ConfigError naming the
// field. Missing fields keep their defaults.
TrainConfig load_train_config(const std::string& path);

// Sets one field from its string form ("lambda_shf", "0.5"). Used by CLI
// overrides; same strictness as the file path.
void apply_config_override(TrainConfig& config, const std::string& key, const std::string& value);

// Full dump, keys sorted, every field present. The hash feeds the checkpoint
// header so resume refuses a mismatched config.
std::string train_config_to_json(const TrainConfig& config);
void save_train_config(const std::string& path, const TrainConfig& config);
uint64_t train_config_hash(const TrainConfig& config);

void validate_train_config(const TrainConfig& config);

}  // namespace fsplat
