#include "fsplat/shf.hpp"

#include <cmath>

#include "fsplat/errors.hpp"
#include "fsplat/fft.hpp"

namespace fsplat {

Image shf_weight_map(const Image& gt, double radius_ratio) {
    Image hf = high_freq_image(gt, radius_ratio);
    for (double& v : hf.raw()) v = std::abs(v);
    return hf;
}

ShfResult shf_loss_with_weights(const Image& weights, const Image& gt, const Image& rendered) {
    require(gt.same_shape(rendered), "shf_loss: image shape mismatch");
    require(weights.same_shape(gt), "shf_loss: weight map shape mismatch");
    ShfResult res;
    res.grad_rendered = Image(gt.height(), gt.width(), gt.channels());
    for (size_t i = 0; i < gt.size(); ++i) {
        double w = weights.raw()[i];
        double r = gt.raw()[i] - rendered.raw()[i];
        res.loss += w * std::abs(r);
        res.grad_rendered.raw()[i] = r > 0 ? -w : (r < 0 ? w : 0.0);
    }
    return res;
}

ShfResult shf_loss(const Image& gt, const Image& rendered, double radius_ratio) {
    return shf_loss_with_weights(shf_weight_map(gt, radius_ratio), gt, rendered);
}

}  // namespace fsplat
