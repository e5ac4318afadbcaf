#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsplat/dataset.hpp"
#include "fsplat/gaussian_cloud.hpp"

namespace fsplat {

// Oracle scene: analytic per-frame clouds rendered by the reference path.
// Names: static_texture (high-frequency patch, no motion, default T = 1),
// translating_blob (cluster moving exactly +2 px/frame, default T = 8),
// pulsating_sheet (sinusoidal depth bump, default T = 8).
struct SyntheticScene {
    std::string name;
    Camera camera;
    int frame_count = 1;
    std::vector<GaussianCloud> clouds;  // one per frame, rows aligned
    Dataset dataset;                    // rendered frames, depth, GT flow
};

SyntheticScene make_synthetic_scene(const std::string& name, uint64_t seed, int frames = 0,
                                    int size = 64);

}  // namespace fsplat
