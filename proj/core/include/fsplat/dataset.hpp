#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fsplat/camera.hpp"
#include "fsplat/image.hpp"
#include "fsplat/lucas_kanade.hpp"

namespace fsplat {

struct FrameRecord {
    Image image;        // H x W x 3 in [0,1]
    Image depth;        // H x W x 1 scene units, empty when the dataset has none
    Image mask;         // H x W x 1, 1 = tool/occluded pixel
    double time = 0.0;  // i / frame_count, i from 0
};

// Directory layout:
//   camera.json                  intrinsics, extrinsics, depth_scale
//   images/0000.png ...          8-bit RGB
//   depth/0000.png ...           16-bit gray, value = tick * depth_scale (optional)
//   masks/0000.png ...           nonzero = excluded (optional)
//   flow/0001.flo + 0001_valid.png  forward flow for pair (i-1, i) (optional)
struct Dataset {
    Camera camera;
    std::vector<FrameRecord> frames;
    // gt_flows[i] pairs frames (i-1, i); index 0 unused. Empty when absent.
    std::vector<FlowField> gt_flows;
    bool has_depth = false;
    bool has_gt_flow = false;
    double depth_scale = 1e-4;
    // Pixel bbox [x0, y0, x1, y1), present in synthetic scenes that carry a
    // high-frequency patch.
    std::optional<std::array<int, 4>> texture_region;

    int frame_count() const { return static_cast<int>(frames.size()); }
};

Dataset load_dataset(const std::string& root);
void save_dataset(const std::string& root, const Dataset& dataset);

}  // namespace fsplat
