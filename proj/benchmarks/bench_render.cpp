#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "fsplat/rasterizer.hpp"

namespace fsplat {
namespace {

GaussianCloud random_cloud(size_t n, const Camera& cam, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * dist(rng); };
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    cloud.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double z = uniform(0.5, 4.0);
        cloud.positions[i] = cam.unproject(uniform(0, cam.width), uniform(0, cam.height), z);
        cloud.log_scales[i] = Vec3::Constant(std::log(uniform(0.01, 0.08)));
        cloud.rotations[i] = Vec4(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
        cloud.opacity_logits[i] = uniform(-2.0, 2.0);
        double* sh = cloud.sh_ptr(i);
        for (int k = 0; k < cloud.sh_stride(); ++k) sh[k] = uniform(-0.5, 0.5);
    }
    return cloud;
}

Camera bench_camera(int size) {
    Camera cam;
    cam.width = cam.height = size;
    cam.fx = cam.fy = size * 1.25;
    cam.cx = cam.cy = size / 2.0;
    cam.near_plane = 0.1;
    cam.far_plane = 10.0;
    return cam;
}

void BM_RenderForward(benchmark::State& state) {
    Camera cam = bench_camera(64);
    GaussianCloud cloud = random_cloud(state.range(0), cam, 1);
    RenderOptions options;
    for (auto _ : state) {
        RenderOutput out = render(cloud, cam, options, nullptr);
        benchmark::DoNotOptimize(out.image.raw().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderForward)->Arg(256)->Arg(1024)->Arg(4096);

void BM_RenderBackward(benchmark::State& state) {
    Camera cam = bench_camera(64);
    GaussianCloud cloud = random_cloud(state.range(0), cam, 2);
    RenderOptions options;
    Image grad_image(64, 64, 3, 1.0 / (64.0 * 64.0));
    for (auto _ : state) {
        RenderSavedState saved;
        RenderOutput out = render(cloud, cam, options, &saved);
        benchmark::DoNotOptimize(out.alpha.raw().data());
        RenderBackwardResult back = render_backward(cloud, grad_image, Image(), Image(), saved);
        benchmark::DoNotOptimize(back.grads.positions.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderBackward)->Arg(256)->Arg(1024)->Arg(4096);

}  // namespace
}  // namespace fsplat

BENCHMARK_MAIN();