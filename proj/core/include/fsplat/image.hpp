#pragma once

#include <cstddef>
#include <vector>

#include "fsplat/errors.hpp"

namespace fsplat {

// Dense row-major H x W x C image of doubles. Channel is the fastest-varying
// index so a pixel's channels are contiguous.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<size_t>(height) * width * channels, fill) {
        require(height >= 0 && width >= 0 && channels >= 0, "negative image shape");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int y, int x, int c) {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int y, int x, int c) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

double max_abs_diff(const Image& a, const Image& b);

}  // namespace fsplat
