#include "fsplat/gaussian_cloud.hpp"

#include "fsplat/errors.hpp"

namespace fsplat {

void GaussianCloud::resize(size_t n) {
    positions.resize(n, Vec3::Zero());
    rotations.resize(n, Vec4(1, 0, 0, 0));
    log_scales.resize(n, Vec3::Zero());
    opacity_logits.resize(n, 0.0);
    sh_coeffs.resize(n * sh_stride(), 0.0);
}

void GaussianCloud::append_from(const GaussianCloud& src, size_t i) {
    require(sh_degree == src.sh_degree, "append_from: sh degree mismatch");
    positions.push_back(src.positions[i]);
    rotations.push_back(src.rotations[i]);
    log_scales.push_back(src.log_scales[i]);
    opacity_logits.push_back(src.opacity_logits[i]);
    // Copy first: src may alias *this and insert would invalidate the range.
    std::vector<double> sh(src.sh_ptr(i), src.sh_ptr(i) + sh_stride());
    sh_coeffs.insert(sh_coeffs.end(), sh.begin(), sh.end());
}

void GaussianCloud::filter(const std::vector<uint8_t>& keep) {
    require(keep.size() == size(), "filter: mask size mismatch");
    size_t out = 0;
    int stride = sh_stride();
    for (size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        if (out != i) {
            positions[out] = positions[i];
            rotations[out] = rotations[i];
            log_scales[out] = log_scales[i];
            opacity_logits[out] = opacity_logits[i];
            std::copy(sh_coeffs.begin() + i * stride, sh_coeffs.begin() + (i + 1) * stride,
                      sh_coeffs.begin() + out * stride);
        }
        ++out;
    }
    positions.resize(out);
    rotations.resize(out);
    log_scales.resize(out);
    opacity_logits.resize(out);
    sh_coeffs.resize(out * stride);
}

void GaussianCloud::check_consistent() const {
    size_t n = positions.size();
    require(rotations.size() == n && log_scales.size() == n && opacity_logits.size() == n &&
                sh_coeffs.size() == n * sh_stride(),
            "gaussian cloud arrays out of sync");
}

void CloudGrads::resize_like(const GaussianCloud& cloud) {
    positions.assign(cloud.size(), Vec3::Zero());
    rotations.assign(cloud.size(), Vec4::Zero());
    log_scales.assign(cloud.size(), Vec3::Zero());
    opacity_logits.assign(cloud.size(), 0.0);
    sh_coeffs.assign(cloud.sh_coeffs.size(), 0.0);
}

void CloudGrads::set_zero() {
    std::fill(positions.begin(), positions.end(), Vec3::Zero());
    std::fill(rotations.begin(), rotations.end(), Vec4::Zero());
    std::fill(log_scales.begin(), log_scales.end(), Vec3::Zero());
    std::fill(opacity_logits.begin(), opacity_logits.end(), 0.0);
    std::fill(sh_coeffs.begin(), sh_coeffs.end(), 0.0);
}

void CloudGrads::accumulate(const CloudGrads& other) {
    require(positions.size() == other.positions.size() && sh_coeffs.size() == other.sh_coeffs.size(),
            "accumulate: grad size mismatch");
    for (size_t i = 0; i < positions.size(); ++i) {
        positions[i] += other.positions[i];
        rotations[i] += other.rotations[i];
        log_scales[i] += other.log_scales[i];
        opacity_logits[i] += other.opacity_logits[i];
    }
    for (size_t i = 0; i < sh_coeffs.size(); ++i) sh_coeffs[i] += other.sh_coeffs[i];
}

}  // namespace fsplat
