#pragma once

#include <string>

#include "fsplat/gaussian_cloud.hpp"

namespace fsplat {

// Binary little-endian PLY using the splat-viewer attribute layout:
// x y z, f_dc_0..2, f_rest_*, opacity (logit), scale_0..2 (log), rot_0..3.
void write_ply(const std::string& path, const GaussianCloud& cloud);

}  // namespace fsplat
