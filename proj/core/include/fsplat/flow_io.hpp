#pragma once

#include <string>

#include "fsplat/lucas_kanade.hpp"

namespace fsplat {

// Middlebury .flo: float magic 202021.25, int32 width/height, interleaved
// row-major float (u, v) pairs. Validity travels in a PNG sidecar, so read
// returns an all-valid field.
void write_flo(const std::string& path, const FlowField& flow);
FlowField read_flo(const std::string& path);

// HSV flow panel: hue encodes direction, saturation encodes magnitude
// relative to max_mag (auto-scaled when max_mag <= 0). Invalid pixels black.
Image flow_to_rgb(const FlowField& flow, double max_mag = 0.0);

}  // namespace fsplat
