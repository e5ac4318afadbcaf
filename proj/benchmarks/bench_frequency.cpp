#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "fsplat/fft.hpp"
#include "fsplat/lucas_kanade.hpp"
#include "fsplat/shf.hpp"

namespace fsplat {
namespace {

Image noise_image(int h, int w, int c, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Image img(h, w, c);
    for (double& v : img.raw()) v = dist(rng);
    return img;
}

Image textured_frame(int size, double shift) {
    Image img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double u = x - shift;
            img.at(y, x, 0) = 0.5 + 0.25 * std::sin(0.9 * u) * std::cos(0.7 * y);
            img.at(y, x, 1) = 0.5 + 0.2 * std::sin(0.5 * u + 0.3 * y);
            img.at(y, x, 2) = 0.5 + 0.15 * std::cos(1.3 * u - 0.2 * y);
        }
    }
    return img;
}

void BM_Fft2(benchmark::State& state) {
    int size = static_cast<int>(state.range(0));
    Image img = noise_image(size, size, 3, 11);
    for (auto _ : state) {
        Spectrum spec = fft2(img);
        benchmark::DoNotOptimize(spec.amplitude.raw().data());
    }
    state.SetItemsProcessed(state.iterations() * img.size());
}
BENCHMARK(BM_Fft2)->Arg(64)->Arg(256);

void BM_ShfWeightMap(benchmark::State& state) {
    int size = static_cast<int>(state.range(0));
    Image img = noise_image(size, size, 3, 12);
    for (auto _ : state) {
        Image weights = shf_weight_map(img, 0.25);
        benchmark::DoNotOptimize(weights.raw().data());
    }
    state.SetItemsProcessed(state.iterations() * img.size());
}
BENCHMARK(BM_ShfWeightMap)->Arg(64)->Arg(256);

void BM_LucasKanade(benchmark::State& state) {
    int size = static_cast<int>(state.range(0));
    Image a = textured_frame(size, 0.0);
    Image b = textured_frame(size, 1.5);
    LkOptions options;
    for (auto _ : state) {
        FlowField flow = lk_flow(a, b, options);
        benchmark::DoNotOptimize(flow.u.raw().data());
    }
    state.SetItemsProcessed(state.iterations() * a.size() / 3);
}
BENCHMARK(BM_LucasKanade)->Arg(64)->Arg(128);

}  // namespace
}  // namespace fsplat