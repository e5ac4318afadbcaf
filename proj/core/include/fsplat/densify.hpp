#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fsplat/gaussian_cloud.hpp"

namespace fsplat {

struct DensifyConfig {
    int interval = 100;
    double grad_threshold = 2e-4;
    double opacity_prune_threshold = 0.005;
    // World-space scale above which a candidate is split instead of cloned.
    // The trainer sets this to 0.01 * scene_extent.
    double scale_split_threshold = 0.01;
    double split_scale_factor = 1.6;
    size_t max_gaussians = 200000;
};

// Screen-space positional gradient magnitudes accumulated between
// densification events. The mean is taken over steps where the gaussian
// touched at least one tile.
struct DensifyStats {
    std::vector<double> grad_accum;
    std::vector<int> visible_count;

    void resize(size_t n);
    void reset();
    void accumulate(const std::vector<double>& screen_grad_norm,
                    const std::vector<uint8_t>& visible);
};

// Adam moments in cloud layout, kept in lockstep with the cloud across
// clone/split/prune events (new rows zero, removed rows dropped).
struct CloudMoments {
    CloudGrads m, v;
    void resize_like(const GaussianCloud& cloud);
};

struct DensifyReport {
    size_t cloned = 0;
    size_t split = 0;
    size_t pruned = 0;
};

// Clones small high-gradient gaussians, splits large ones into two samples
// drawn from the source density with scales divided by split_scale_factor,
// prunes rows whose sigmoid opacity falls below the prune threshold, and
// resets the stats. Additions stop at max_gaussians.
DensifyReport densify_and_prune(GaussianCloud& cloud, DensifyStats& stats, CloudMoments& moments,
                                const DensifyConfig& config, std::mt19937_64& rng);

}  // namespace fsplat
