#include "fsplat/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <type_traits>
#include <utility>

#include "fsplat/errors.hpp"

static_assert(__BYTE_ORDER__ == __ORDER_LITTLE_ENDIAN__, "checkpoint format is little-endian");

namespace fsplat {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

constexpr char kMagic[8] = {'F', 'S', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError(std::string("checkpoint truncated reading ") + what);
    return v;
}

void put_doubles(std::ostream& os, const double* p, size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& is, double* p, size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw DataError(std::string("checkpoint truncated reading ") + what);
}

void check(bool ok, const char* what) {
    if (!ok) throw DataError(std::string("checkpoint mismatch: ") + what);
}

void put_camera(std::ostream& os, const Camera& cam) {
    put<int32_t>(os, cam.width);
    put<int32_t>(os, cam.height);
    put(os, cam.fx);
    put(os, cam.fy);
    put(os, cam.cx);
    put(os, cam.cy);
    put(os, cam.near_plane);
    put(os, cam.far_plane);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) put(os, cam.world_to_camera(r, c));
}

Camera get_camera(std::istream& is) {
    Camera cam;
    cam.width = get<int32_t>(is, "camera");
    cam.height = get<int32_t>(is, "camera");
    cam.fx = get<double>(is, "camera");
    cam.fy = get<double>(is, "camera");
    cam.cx = get<double>(is, "camera");
    cam.cy = get<double>(is, "camera");
    cam.near_plane = get<double>(is, "camera");
    cam.far_plane = get<double>(is, "camera");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = get<double>(is, "camera");
    return cam;
}

void put_cloud_arrays(std::ostream& os, const std::vector<Vec3>& p3, const std::vector<Vec4>& p4,
                      const std::vector<Vec3>& ls, const std::vector<double>& op,
                      const std::vector<double>& sh) {
    for (const Vec3& v : p3) put_doubles(os, v.data(), 3);
    for (const Vec4& v : p4) put_doubles(os, v.data(), 4);
    for (const Vec3& v : ls) put_doubles(os, v.data(), 3);
    put_doubles(os, op.data(), op.size());
    put_doubles(os, sh.data(), sh.size());
}

void get_cloud_arrays(std::istream& is, std::vector<Vec3>& p3, std::vector<Vec4>& p4,
                      std::vector<Vec3>& ls, std::vector<double>& op, std::vector<double>& sh) {
    for (Vec3& v : p3) get_doubles(is, v.data(), 3, "cloud");
    for (Vec4& v : p4) get_doubles(is, v.data(), 4, "cloud");
    for (Vec3& v : ls) get_doubles(is, v.data(), 3, "cloud");
    get_doubles(is, op.data(), op.size(), "cloud");
    get_doubles(is, sh.data(), sh.size(), "cloud");
}

void put_field_params(std::ostream& os, const HexPlanes& planes, const DeformMlp& mlp) {
    put<uint32_t>(os, static_cast<uint32_t>(planes.levels.size()));
    for (const auto& level : planes.levels) {
        for (const PlaneGrid& g : level) {
            put<int32_t>(os, g.n1);
            put<int32_t>(os, g.n2);
            put<int32_t>(os, g.width);
            put_doubles(os, g.data.data(), g.data.size());
        }
    }
    auto put_linear = [&os](const Linear& l) {
        put<int32_t>(os, l.in);
        put<int32_t>(os, l.out);
        put_doubles(os, l.w.data(), l.w.size());
        put_doubles(os, l.b.data(), l.b.size());
    };
    put<uint32_t>(os, static_cast<uint32_t>(mlp.trunk.size()));
    for (const Linear& l : mlp.trunk) put_linear(l);
    put_linear(mlp.head_position);
    put_linear(mlp.head_log_scale);
    put_linear(mlp.head_rotation);
    put_linear(mlp.head_sh);
    put_linear(mlp.head_opacity);
}

// Reads plane and mlp buffers into a field whose shapes were already built
// from the stored config; every dimension must agree.
void get_field_params(std::istream& is, HexPlanes& planes, DeformMlp& mlp, const char* what) {
    uint32_t n_levels = get<uint32_t>(is, what);
    check(n_levels == planes.levels.size(), "plane level count");
    for (auto& level : planes.levels) {
        for (PlaneGrid& g : level) {
            check(get<int32_t>(is, what) == g.n1, "plane rows");
            check(get<int32_t>(is, what) == g.n2, "plane cols");
            check(get<int32_t>(is, what) == g.width, "plane feature width");
            get_doubles(is, g.data.data(), g.data.size(), what);
        }
    }
    auto get_linear = [&is, what](Linear& l) {
        check(get<int32_t>(is, what) == l.in, "mlp layer input dim");
        check(get<int32_t>(is, what) == l.out, "mlp layer output dim");
        get_doubles(is, l.w.data(), l.w.size(), what);
        get_doubles(is, l.b.data(), l.b.size(), what);
    };
    uint32_t n_trunk = get<uint32_t>(is, what);
    check(n_trunk == mlp.trunk.size(), "mlp trunk depth");
    for (Linear& l : mlp.trunk) get_linear(l);
    get_linear(mlp.head_position);
    get_linear(mlp.head_log_scale);
    get_linear(mlp.head_rotation);
    get_linear(mlp.head_sh);
    get_linear(mlp.head_opacity);
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainerState& state, uint64_t config_hash) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);

    os.write(kMagic, sizeof(kMagic));
    put<uint32_t>(os, kVersion);
    put<uint64_t>(os, config_hash);
    put<int32_t>(os, state.stage);
    put<int64_t>(os, state.iteration);
    put<int64_t>(os, state.cloud_step);
    put<int64_t>(os, state.field_step);
    put(os, state.scene_extent);
    put<int32_t>(os, state.frame_count);
    put_camera(os, state.camera);

    put<uint64_t>(os, state.cloud.size());
    put<int32_t>(os, state.cloud.sh_degree);
    put_cloud_arrays(os, state.cloud.positions, state.cloud.rotations, state.cloud.log_scales,
                     state.cloud.opacity_logits, state.cloud.sh_coeffs);
    for (const CloudGrads* g : {&state.cloud_moments.m, &state.cloud_moments.v}) {
        put_cloud_arrays(os, g->positions, g->rotations, g->log_scales, g->opacity_logits,
                         g->sh_coeffs);
    }

    const HexPlaneConfig& cfg = state.field.planes.config;
    put<int32_t>(os, cfg.levels);
    put<int32_t>(os, cfg.base_spatial_res);
    put<int32_t>(os, cfg.base_time_res);
    put<int32_t>(os, cfg.level_scale);
    put<int32_t>(os, cfg.feature_width);
    put(os, cfg.init_scale);
    put_doubles(os, state.field.planes.bounds_min.data(), 3);
    put_doubles(os, state.field.planes.bounds_max.data(), 3);
    put<int32_t>(os, state.field.sh_dims);
    put<int32_t>(os, static_cast<int32_t>(state.field.mlp.trunk.size()));
    put<int32_t>(os, state.field.mlp.trunk.empty() ? 0 : state.field.mlp.trunk[0].out);

    put_field_params(os, state.field.planes, state.field.mlp);
    put_field_params(os, state.field_m.planes, state.field_m.mlp);
    put_field_params(os, state.field_v.planes, state.field_v.mlp);

    put<uint64_t>(os, state.densify_stats.grad_accum.size());
    put_doubles(os, state.densify_stats.grad_accum.data(), state.densify_stats.grad_accum.size());
    for (int c : state.densify_stats.visible_count) put<int32_t>(os, c);

    put<uint64_t>(os, state.rng_state.size());
    os.write(state.rng_state.data(), static_cast<std::streamsize>(state.rng_state.size()));

    os.flush();
    if (!os) throw DataError("checkpoint write failed: " + path);
}

TrainerState load_checkpoint(const std::string& path, uint64_t expected_config_hash) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("checkpoint mismatch: bad magic in " + path);
    }
    uint32_t version = get<uint32_t>(is, "version");
    check(version == kVersion, "unsupported version");
    uint64_t hash = get<uint64_t>(is, "config hash");
    if (expected_config_hash != 0 && hash != expected_config_hash) {
        throw DataError("checkpoint mismatch: config hash differs from the provided config");
    }

    TrainerState state;
    state.stage = get<int32_t>(is, "stage");
    state.iteration = get<int64_t>(is, "iteration");
    state.cloud_step = get<int64_t>(is, "cloud step");
    state.field_step = get<int64_t>(is, "field step");
    state.scene_extent = get<double>(is, "scene extent");
    state.frame_count = get<int32_t>(is, "frame count");
    state.camera = get_camera(is);

    uint64_t count = get<uint64_t>(is, "cloud size");
    state.cloud.sh_degree = get<int32_t>(is, "sh degree");
    check(state.cloud.sh_degree >= 0 && state.cloud.sh_degree <= 4, "sh degree out of range");
    state.cloud.resize(count);
    get_cloud_arrays(is, state.cloud.positions, state.cloud.rotations, state.cloud.log_scales,
                     state.cloud.opacity_logits, state.cloud.sh_coeffs);
    state.cloud_moments.resize_like(state.cloud);
    for (CloudGrads* g : {&state.cloud_moments.m, &state.cloud_moments.v}) {
        get_cloud_arrays(is, g->positions, g->rotations, g->log_scales, g->opacity_logits,
                         g->sh_coeffs);
    }

    HexPlaneConfig cfg;
    cfg.levels = get<int32_t>(is, "field config");
    cfg.base_spatial_res = get<int32_t>(is, "field config");
    cfg.base_time_res = get<int32_t>(is, "field config");
    cfg.level_scale = get<int32_t>(is, "field config");
    cfg.feature_width = get<int32_t>(is, "field config");
    cfg.init_scale = get<double>(is, "field config");
    Vec3 bmin, bmax;
    get_doubles(is, bmin.data(), 3, "field bounds");
    get_doubles(is, bmax.data(), 3, "field bounds");
    int32_t sh_dims = get<int32_t>(is, "field config");
    int32_t mlp_layers = get<int32_t>(is, "field config");
    int32_t mlp_hidden = get<int32_t>(is, "field config");
    cfg.validate();
    state.field.init(cfg, mlp_hidden, mlp_layers, bmin, bmax, sh_dims, 0);
    state.field_m.zero_like(state.field);
    state.field_v.zero_like(state.field);
    get_field_params(is, state.field.planes, state.field.mlp, "field");
    get_field_params(is, state.field_m.planes, state.field_m.mlp, "field moments");
    get_field_params(is, state.field_v.planes, state.field_v.mlp, "field moments");

    uint64_t stat_n = get<uint64_t>(is, "densify stats");
    check(stat_n == count, "densify stat rows");
    state.densify_stats.resize(stat_n);
    get_doubles(is, state.densify_stats.grad_accum.data(), stat_n, "densify stats");
    for (uint64_t i = 0; i < stat_n; ++i) {
        state.densify_stats.visible_count[i] = get<int32_t>(is, "densify stats");
    }

    uint64_t rng_len = get<uint64_t>(is, "rng state");
    check(rng_len < (1u << 20), "rng state length");
    state.rng_state.resize(rng_len);
    is.read(state.rng_state.data(), static_cast<std::streamsize>(rng_len));
    if (!is) throw DataError("checkpoint truncated reading rng state");
    return state;
}

CheckpointWriter::~CheckpointWriter() {
    if (worker_.joinable()) worker_.join();
}

void CheckpointWriter::write(std::string path, TrainerState snapshot, uint64_t config_hash) {
    wait();
    worker_ = std::thread([this, path = std::move(path), snapshot = std::move(snapshot),
                           config_hash]() {
        try {
            save_checkpoint(path, snapshot, config_hash);
        } catch (...) {
            error_ = std::current_exception();
        }
    });
}

void CheckpointWriter::wait() {
    if (worker_.joinable()) worker_.join();
    if (error_) {
        std::exception_ptr e = error_;
        error_ = nullptr;
        std::rethrow_exception(e);
    }
}

}  // namespace fsplat
