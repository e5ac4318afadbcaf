#pragma once

#include <cstddef>
#include <cstdint>

namespace fsplat {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam update over a flat parameter span. m and v are the running first
// and second moments (same length as params); step is 1-based and drives the
// bias correction. If any gradient entry is non-finite the whole group is
// left untouched and false is returned so the caller can warn.
bool adam_step(double* params, const double* grads, double* m, double* v, size_t n, double lr,
               int64_t step, const AdamOptions& opts = {});

// lr_init * (lr_final / lr_init)^(step / max_steps), clamped to the ends.
double exp_lr(double lr_init, double lr_final, int64_t step, int64_t max_steps);

}  // namespace fsplat
