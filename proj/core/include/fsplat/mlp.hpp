#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fsplat/types.hpp"

namespace fsplat {

// Dense layer, weights row-major (out x in).
struct Linear {
    int in = 0, out = 0;
    std::vector<double> w;
    std::vector<double> b;

    void resize(int in_, int out_) {
        in = in_;
        out = out_;
        w.assign(static_cast<size_t>(in) * out, 0.0);
        b.assign(out, 0.0);
    }
    void init_xavier(int in_, int out_, std::mt19937_64& rng);

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    // Accumulates dW, db into grad (same shape), returns dL/dx.
    Eigen::VectorXd backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_y,
                             Linear* grad) const;
};

struct DeformDelta {
    Vec3 position = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Eigen::VectorXd sh;  // 3 * coeffs_per_channel
    double opacity_logit = 0.0;
};

// Shared tanh trunk feeding five linear heads. Heads start at zero so the
// decoded deltas vanish until training moves them.
struct DeformMlp {
    std::vector<Linear> trunk;
    Linear head_position;
    Linear head_log_scale;
    Linear head_rotation;
    Linear head_sh;
    Linear head_opacity;

    void init(int input_dim, int hidden_width, int hidden_layers, int sh_dims, uint64_t seed);
    void zero_like(const DeformMlp& other);
    size_t parameter_count() const;

    // hidden, when given, receives the post-activation trunk outputs the
    // backward pass needs.
    DeformDelta forward(const Eigen::VectorXd& features,
                        std::vector<Eigen::VectorXd>* hidden) const;
    // grad accumulates parameter gradients; returns dL/dfeatures.
    Eigen::VectorXd backward(const Eigen::VectorXd& features,
                             const std::vector<Eigen::VectorXd>& hidden, const DeformDelta& grad_delta,
                             DeformMlp* grad) const;
};

}  // namespace fsplat
