#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "fsplat/deformation.hpp"

namespace fsplat {
namespace {

GaussianCloud box_cloud(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    cloud.resize(n);
    for (size_t i = 0; i < n; ++i) {
        cloud.positions[i] = Vec3(dist(rng), dist(rng), dist(rng) + 2.0);
        cloud.log_scales[i] = Vec3::Constant(-3.0);
        cloud.opacity_logits[i] = 1.0;
    }
    return cloud;
}

DeformField bench_field(const GaussianCloud& cloud) {
    HexPlaneConfig cfg;
    cfg.levels = 2;
    cfg.base_spatial_res = 32;
    cfg.base_time_res = 16;
    cfg.feature_width = 16;
    DeformField field;
    field.init(cfg, 64, 2, Vec3(-1.5, -1.5, 0.5), Vec3(1.5, 1.5, 3.5), cloud.sh_stride(), 7);
    return field;
}

void BM_DeformForward(benchmark::State& state) {
    GaussianCloud cloud = box_cloud(state.range(0), 3);
    DeformField field = bench_field(cloud);
    for (auto _ : state) {
        GaussianCloud deformed = deform_cloud(cloud, 0.37, field, nullptr, 1);
        benchmark::DoNotOptimize(deformed.positions.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DeformForward)->Arg(1024)->Arg(8192);

void BM_DeformBackward(benchmark::State& state) {
    GaussianCloud cloud = box_cloud(state.range(0), 4);
    DeformField field = bench_field(cloud);
    CloudGrads out_grads;
    out_grads.resize_like(cloud);
    for (Vec3& g : out_grads.positions) g = Vec3(1e-3, -1e-3, 1e-3);
    for (auto _ : state) {
        DeformContext ctx;
        GaussianCloud deformed = deform_cloud(cloud, 0.37, field, &ctx, 1);
        benchmark::DoNotOptimize(deformed.positions.data());
        CloudGrads cloud_grads;
        cloud_grads.resize_like(cloud);
        DeformField field_grads;
        field_grads.zero_like(field);
        deform_cloud_backward(cloud, field, ctx, out_grads, &cloud_grads, &field_grads, 1);
        benchmark::DoNotOptimize(cloud_grads.positions.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DeformBackward)->Arg(1024)->Arg(8192);

}  // namespace
}  // namespace fsplat