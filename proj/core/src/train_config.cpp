#include "fsplat/train_config.hpp"

#include <json.hpp>

#include <fstream>
#include <map>

#include "fsplat/checkpoint.hpp"
#include "fsplat/errors.hpp"

using nlohmann::json;

namespace fsplat {

namespace {

struct FieldTable {
    std::map<std::string, double TrainConfig::*> doubles;
    std::map<std::string, int TrainConfig::*> ints;
    std::map<std::string, uint64_t TrainConfig::*> u64s;
    std::map<std::string, std::string TrainConfig::*> strings;
};

const FieldTable& fields() {
    static const FieldTable table = [] {
        FieldTable t;
        t.ints = {
            {"static_iters", &TrainConfig::static_iters},
            {"deform_iters", &TrainConfig::deform_iters},
            {"densify_interval", &TrainConfig::densify_interval},
            {"max_gaussians", &TrainConfig::max_gaussians},
            {"lk_levels", &TrainConfig::lk_levels},
            {"lk_window", &TrainConfig::lk_window},
            {"lk_iterations", &TrainConfig::lk_iterations},
            {"census_window", &TrainConfig::census_window},
            {"plane_levels", &TrainConfig::plane_levels},
            {"plane_base_spatial_res", &TrainConfig::plane_base_spatial_res},
            {"plane_base_time_res", &TrainConfig::plane_base_time_res},
            {"plane_level_scale", &TrainConfig::plane_level_scale},
            {"plane_feature_width", &TrainConfig::plane_feature_width},
            {"mlp_hidden_width", &TrainConfig::mlp_hidden_width},
            {"mlp_hidden_layers", &TrainConfig::mlp_hidden_layers},
            {"init_stride", &TrainConfig::init_stride},
            {"sh_degree", &TrainConfig::sh_degree},
            {"checkpoint_interval", &TrainConfig::checkpoint_interval},
            {"threads", &TrainConfig::threads},
        };
        t.doubles = {
            {"lr_position", &TrainConfig::lr_position},
            {"lr_position_final", &TrainConfig::lr_position_final},
            {"lr_rotation", &TrainConfig::lr_rotation},
            {"lr_scale", &TrainConfig::lr_scale},
            {"lr_opacity", &TrainConfig::lr_opacity},
            {"lr_sh", &TrainConfig::lr_sh},
            {"lr_planes", &TrainConfig::lr_planes},
            {"lr_mlp", &TrainConfig::lr_mlp},
            {"densify_grad_threshold", &TrainConfig::densify_grad_threshold},
            {"opacity_prune_threshold", &TrainConfig::opacity_prune_threshold},
            {"scale_split_threshold", &TrainConfig::scale_split_threshold},
            {"lambda_d", &TrainConfig::lambda_d},
            {"lambda_tv", &TrainConfig::lambda_tv},
            {"lambda_shf", &TrainConfig::lambda_shf},
            {"lambda_thf", &TrainConfig::lambda_thf},
            {"shf_radius_ratio", &TrainConfig::shf_radius_ratio},
            {"depth_delta", &TrainConfig::depth_delta},
            {"depth_alpha_min", &TrainConfig::depth_alpha_min},
            {"charbonnier_eps", &TrainConfig::charbonnier_eps},
            {"plane_init_scale", &TrainConfig::plane_init_scale},
            {"init_opacity", &TrainConfig::init_opacity},
        };
        t.u64s = {
            {"seed", &TrainConfig::seed},
        };
        t.strings = {
            {"flow_predictor", &TrainConfig::flow_predictor},
        };
        return t;
    }();
    return table;
}

void assign_field(TrainConfig& config, const std::string& key, const json& value) {
    const FieldTable& t = fields();
    if (auto it = t.doubles.find(key); it != t.doubles.end()) {
        if (!value.is_number()) throw ConfigError("config field '" + key + "' must be a number");
        config.*(it->second) = value.get<double>();
        return;
    }
    if (auto it = t.ints.find(key); it != t.ints.end()) {
        if (!value.is_number_integer()) {
            throw ConfigError("config field '" + key + "' must be an integer");
        }
        config.*(it->second) = value.get<int>();
        return;
    }
    if (auto it = t.u64s.find(key); it != t.u64s.end()) {
        if (!value.is_number_integer()) {
            throw ConfigError("config field '" + key + "' must be an integer");
        }
        config.*(it->second) = value.get<uint64_t>();
        return;
    }
    if (auto it = t.strings.find(key); it != t.strings.end()) {
        if (!value.is_string()) throw ConfigError("config field '" + key + "' must be a string");
        config.*(it->second) = value.get<std::string>();
        return;
    }
    throw ConfigError("unknown config field '" + key + "'");
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed json in config file: " + path);
    if (!j.is_object()) throw ConfigError("config file must hold a json object: " + path);
    TrainConfig config;
    for (const auto& item : j.items()) assign_field(config, item.key(), item.value());
    return config;
}

void apply_config_override(TrainConfig& config, const std::string& key, const std::string& value) {
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;  // bare strings pass through
    assign_field(config, key, parsed);
}

std::string train_config_to_json(const TrainConfig& config) {
    const FieldTable& t = fields();
    json j;
    for (const auto& [key, member] : t.ints) j[key] = config.*member;
    for (const auto& [key, member] : t.doubles) j[key] = config.*member;
    for (const auto& [key, member] : t.u64s) j[key] = config.*member;
    for (const auto& [key, member] : t.strings) j[key] = config.*member;
    return j.dump(2);
}

void save_train_config(const std::string& path, const TrainConfig& config) {
    std::ofstream os(path);
    os << train_config_to_json(config) << "\n";
    if (!os) throw DataError("cannot write config to " + path);
}

uint64_t train_config_hash(const TrainConfig& config) {
    return fnv1a64(train_config_to_json(config));
}

void validate_train_config(const TrainConfig& config) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0)) throw ConfigError(std::string("config field '") + name + "' must be positive");
    };
    if (config.static_iters < 0 || config.deform_iters < 0) {
        throw ConfigError("config field 'static_iters'/'deform_iters' must be non-negative");
    }
    positive(config.lr_position, "lr_position");
    positive(config.lr_position_final, "lr_position_final");
    positive(config.lr_rotation, "lr_rotation");
    positive(config.lr_scale, "lr_scale");
    positive(config.lr_opacity, "lr_opacity");
    positive(config.lr_sh, "lr_sh");
    positive(config.lr_planes, "lr_planes");
    positive(config.lr_mlp, "lr_mlp");
    positive(config.densify_interval, "densify_interval");
    positive(config.max_gaussians, "max_gaussians");
    if (config.lambda_d < 0 || config.lambda_tv < 0 || config.lambda_shf < 0 ||
        config.lambda_thf < 0) {
        throw ConfigError("config loss weights must be non-negative");
    }
    if (config.shf_radius_ratio <= 0 || config.shf_radius_ratio >= 1) {
        throw ConfigError("config field 'shf_radius_ratio' must lie in (0, 1)");
    }
    positive(config.depth_delta, "depth_delta");
    if (config.depth_alpha_min < 0 || config.depth_alpha_min > 1) {
        throw ConfigError("config field 'depth_alpha_min' must lie in [0, 1]");
    }
    if (config.flow_predictor != "lk" && config.flow_predictor != "stored") {
        throw ConfigError("config field 'flow_predictor' must be 'lk' or 'stored'");
    }
    positive(config.lk_levels, "lk_levels");
    positive(config.lk_window, "lk_window");
    positive(config.lk_iterations, "lk_iterations");
    positive(config.charbonnier_eps, "charbonnier_eps");
    positive(config.census_window, "census_window");
    positive(config.plane_levels, "plane_levels");
    if (config.plane_base_spatial_res < 2 || config.plane_base_time_res < 2) {
        throw ConfigError("config plane resolutions must be at least 2");
    }
    positive(config.plane_level_scale, "plane_level_scale");
    positive(config.plane_feature_width, "plane_feature_width");
    positive(config.mlp_hidden_width, "mlp_hidden_width");
    if (config.mlp_hidden_layers < 0) {
        throw ConfigError("config field 'mlp_hidden_layers' must be non-negative");
    }
    positive(config.init_stride, "init_stride");
    if (config.init_opacity <= 0 || config.init_opacity >= 1) {
        throw ConfigError("config field 'init_opacity' must lie in (0, 1)");
    }
    if (config.sh_degree < 0 || config.sh_degree > 1) {
        throw ConfigError("config field 'sh_degree' must be 0 or 1 (decoder bands)");
    }
    positive(config.checkpoint_interval, "checkpoint_interval");
    if (config.threads < 1) throw ConfigError("config field 'threads' must be at least 1");
}

}  // namespace fsplat
