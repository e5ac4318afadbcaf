#include "fsplat/mlp.hpp"

#include <cmath>

#include "fsplat/errors.hpp"

namespace fsplat {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

}  // namespace

void Linear::init_xavier(int in_, int out_, std::mt19937_64& rng) {
    resize(in_, out_);
    double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : w) x = dist(rng);
}

Eigen::VectorXd Linear::apply(const Eigen::VectorXd& x) const {
    require(x.size() == in, "Linear::apply: input size mismatch");
    ConstMap W(w.data(), out, in);
    Eigen::VectorXd y = W * x;
    for (int i = 0; i < out; ++i) y[i] += b[i];
    return y;
}

Eigen::VectorXd Linear::backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_y,
                                 Linear* grad) const {
    require(grad_y.size() == out, "Linear::backward: gradient size mismatch");
    if (grad) {
        MutMap dW(grad->w.data(), out, in);
        dW.noalias() += grad_y * x.transpose();
        for (int i = 0; i < out; ++i) grad->b[i] += grad_y[i];
    }
    ConstMap W(w.data(), out, in);
    return W.transpose() * grad_y;
}

void DeformMlp::init(int input_dim, int hidden_width, int hidden_layers, int sh_dims,
                     uint64_t seed) {
    require(input_dim > 0 && hidden_width > 0 && hidden_layers >= 1 && sh_dims >= 3,
            "DeformMlp::init: bad shape");
    std::mt19937_64 rng(seed);
    trunk.resize(hidden_layers);
    int prev = input_dim;
    for (Linear& layer : trunk) {
        layer.init_xavier(prev, hidden_width, rng);
        prev = hidden_width;
    }
    head_position.resize(prev, 3);
    head_log_scale.resize(prev, 3);
    head_rotation.resize(prev, 4);
    head_sh.resize(prev, sh_dims);
    head_opacity.resize(prev, 1);
}

void DeformMlp::zero_like(const DeformMlp& other) {
    trunk.resize(other.trunk.size());
    for (size_t i = 0; i < trunk.size(); ++i) trunk[i].resize(other.trunk[i].in, other.trunk[i].out);
    head_position.resize(other.head_position.in, other.head_position.out);
    head_log_scale.resize(other.head_log_scale.in, other.head_log_scale.out);
    head_rotation.resize(other.head_rotation.in, other.head_rotation.out);
    head_sh.resize(other.head_sh.in, other.head_sh.out);
    head_opacity.resize(other.head_opacity.in, other.head_opacity.out);
}

size_t DeformMlp::parameter_count() const {
    size_t n = 0;
    auto count = [&n](const Linear& l) { n += l.w.size() + l.b.size(); };
    for (const Linear& l : trunk) count(l);
    count(head_position);
    count(head_log_scale);
    count(head_rotation);
    count(head_sh);
    count(head_opacity);
    return n;
}

DeformDelta DeformMlp::forward(const Eigen::VectorXd& features,
                               std::vector<Eigen::VectorXd>* hidden) const {
    Eigen::VectorXd z = features;
    if (hidden) hidden->clear();
    for (const Linear& layer : trunk) {
        z = layer.apply(z).array().tanh().matrix();
        if (hidden) hidden->push_back(z);
    }
    DeformDelta d;
    d.position = head_position.apply(z);
    d.log_scale = head_log_scale.apply(z);
    d.rotation = head_rotation.apply(z);
    d.sh = head_sh.apply(z);
    d.opacity_logit = head_opacity.apply(z)[0];
    return d;
}

Eigen::VectorXd DeformMlp::backward(const Eigen::VectorXd& features,
                                    const std::vector<Eigen::VectorXd>& hidden,
                                    const DeformDelta& grad_delta, DeformMlp* grad) const {
    require(hidden.size() == trunk.size(), "DeformMlp::backward: missing activations");
    const Eigen::VectorXd& z_last = hidden.back();
    Eigen::VectorXd dz = head_position.backward(z_last, grad_delta.position, grad ? &grad->head_position : nullptr);
    dz += head_log_scale.backward(z_last, grad_delta.log_scale, grad ? &grad->head_log_scale : nullptr);
    dz += head_rotation.backward(z_last, grad_delta.rotation, grad ? &grad->head_rotation : nullptr);
    dz += head_sh.backward(z_last, grad_delta.sh, grad ? &grad->head_sh : nullptr);
    Eigen::VectorXd go(1);
    go[0] = grad_delta.opacity_logit;
    dz += head_opacity.backward(z_last, go, grad ? &grad->head_opacity : nullptr);

    for (int l = static_cast<int>(trunk.size()) - 1; l >= 0; --l) {
        // Through tanh: dz_pre = dz * (1 - z^2).
        const Eigen::VectorXd& z = hidden[l];
        Eigen::VectorXd dpre = (dz.array() * (1.0 - z.array().square())).matrix();
        const Eigen::VectorXd& x = (l == 0) ? features : hidden[l - 1];
        dz = trunk[l].backward(x, dpre, grad ? &grad->trunk[l] : nullptr);
    }
    return dz;
}

}  // namespace fsplat
