#include "fsplat/adam.hpp"

#include <algorithm>
#include <cmath>

#include "fsplat/errors.hpp"

namespace fsplat {

bool adam_step(double* params, const double* grads, double* m, double* v, size_t n, double lr,
               int64_t step, const AdamOptions& opts) {
    require(step >= 1, "adam_step: step must be 1-based");
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grads[i])) return false;
    }
    double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
    double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
    for (size_t i = 0; i < n; ++i) {
        m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * grads[i];
        v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * grads[i] * grads[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
    return true;
}

double exp_lr(double lr_init, double lr_final, int64_t step, int64_t max_steps) {
    require(lr_init > 0 && lr_final > 0, "exp_lr: rates must be positive");
    if (max_steps <= 0) return lr_init;
    double t = std::clamp(static_cast<double>(step) / max_steps, 0.0, 1.0);
    return lr_init * std::pow(lr_final / lr_init, t);
}

}  // namespace fsplat
