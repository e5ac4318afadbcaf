#pragma once

#include <cstdint>
#include <vector>

#include "fsplat/types.hpp"

namespace fsplat {

// Structure-of-arrays Gaussian set. All fields are stored in the unconstrained
// parameterization the optimizer sees:
//   rotations      unnormalized quaternions (w, x, y, z); consumers normalize
//   log_scales     per-axis log standard deviations
//   opacity_logits sigmoid(logit) is the blending opacity
//   sh_coeffs      flat, coefficient-major: [c0.r, c0.g, c0.b, c1.r, ...] per
//                  gaussian, (degree+1)^2 coefficients per channel
struct GaussianCloud {
    std::vector<Vec3> positions;
    std::vector<Vec4> rotations;
    std::vector<Vec3> log_scales;
    std::vector<double> opacity_logits;
    std::vector<double> sh_coeffs;
    int sh_degree = 0;

    size_t size() const { return positions.size(); }
    int sh_coeffs_per_channel() const { return (sh_degree + 1) * (sh_degree + 1); }
    int sh_stride() const { return 3 * sh_coeffs_per_channel(); }

    double* sh_ptr(size_t i) { return sh_coeffs.data() + i * sh_stride(); }
    const double* sh_ptr(size_t i) const { return sh_coeffs.data() + i * sh_stride(); }

    void resize(size_t n);
    void append_from(const GaussianCloud& src, size_t i);
    // Keeps rows where keep[i] is true; preserves order.
    void filter(const std::vector<uint8_t>& keep);
    void check_consistent() const;
};

// Gradients of some scalar loss with respect to every cloud parameter, same
// layout as the cloud itself.
struct CloudGrads {
    std::vector<Vec3> positions;
    std::vector<Vec4> rotations;
    std::vector<Vec3> log_scales;
    std::vector<double> opacity_logits;
    std::vector<double> sh_coeffs;

    void resize_like(const GaussianCloud& cloud);
    void set_zero();
    void accumulate(const CloudGrads& other);
};

}  // namespace fsplat
