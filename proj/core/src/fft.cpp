#include "fsplat/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include "fsplat/errors.hpp"

namespace fsplat {

namespace {

// FFTW's planner is not thread-safe; execution of a created plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

void dft2_channel(const std::vector<std::complex<double>>& in,
                  std::vector<std::complex<double>>& out, int h, int w, int sign) {
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_2d(
            h, w,
            reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
            reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
}

}  // namespace

Spectrum fft2(const Image& image) {
    const int H = image.height(), W = image.width(), C = image.channels();
    require(H >= 2 && W >= 2, "fft2: image must be at least 2x2");
    Spectrum spec;
    spec.amplitude = Image(H, W, C);
    spec.phase = Image(H, W, C);
    spec.centered = true;
    const int cy = H / 2, cx = W / 2;

    std::vector<std::complex<double>> in(static_cast<size_t>(H) * W);
    std::vector<std::complex<double>> out(in.size());
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                in[static_cast<size_t>(y) * W + x] = image.at(y, x, c);
            }
        }
        dft2_channel(in, out, H, W, FFTW_FORWARD);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                // Shift so bin (0,0) lands at (cy, cx).
                int sy = (y + cy) % H;
                int sx = (x + cx) % W;
                std::complex<double> z = out[static_cast<size_t>(y) * W + x];
                spec.amplitude.at(sy, sx, c) = std::abs(z);
                spec.phase.at(sy, sx, c) = std::arg(z);
            }
        }
    }
    return spec;
}

Image ifft2(const Spectrum& spectrum) {
    require(spectrum.centered, "ifft2: expects a centered spectrum");
    require(spectrum.amplitude.same_shape(spectrum.phase), "ifft2: amplitude/phase shape mismatch");
    const int H = spectrum.amplitude.height(), W = spectrum.amplitude.width(),
              C = spectrum.amplitude.channels();
    const int cy = H / 2, cx = W / 2;
    Image result(H, W, C);
    std::vector<std::complex<double>> in(static_cast<size_t>(H) * W);
    std::vector<std::complex<double>> out(in.size());
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                int sy = (y + cy) % H;
                int sx = (x + cx) % W;
                double a = spectrum.amplitude.at(sy, sx, c);
                double p = spectrum.phase.at(sy, sx, c);
                in[static_cast<size_t>(y) * W + x] = std::polar(a, p);
            }
        }
        dft2_channel(in, out, H, W, FFTW_BACKWARD);
        double scale = 1.0 / (static_cast<double>(H) * W);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                result.at(y, x, c) = out[static_cast<size_t>(y) * W + x].real() * scale;
            }
        }
    }
    return result;
}

FrequencyMask make_frequency_mask(int height, int width, double radius_ratio) {
    require(radius_ratio > 0 && radius_ratio < 1, "frequency mask radius_ratio must be in (0,1)");
    FrequencyMask fm;
    fm.radius_ratio = radius_ratio;
    fm.mask = Image(height, width, 1);
    const int cy = height / 2, cx = width / 2;
    double r = radius_ratio * std::min(height, width) / 2.0;
    double r2 = r * r;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double dy = y - cy, dx = x - cx;
            fm.mask.at(y, x, 0) = (dy * dy + dx * dx <= r2) ? 1.0 : 0.0;
        }
    }
    return fm;
}

Image filter_frequencies(const Image& image, double radius_ratio, bool keep_low) {
    Spectrum spec = fft2(image);
    FrequencyMask fm = make_frequency_mask(image.height(), image.width(), radius_ratio);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            double m = fm.mask.at(y, x, 0);
            double keep = keep_low ? m : 1.0 - m;
            for (int c = 0; c < image.channels(); ++c) {
                spec.amplitude.at(y, x, c) *= keep;
            }
        }
    }
    return ifft2(spec);
}

Image high_freq_image(const Image& image, double radius_ratio) {
    return filter_frequencies(image, radius_ratio, false);
}

}  // namespace fsplat
