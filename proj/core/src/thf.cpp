#include "fsplat/thf.hpp"

#include <cmath>

#include "fsplat/errors.hpp"

namespace fsplat {

void FlowPredictor::backward(const Prediction&, const Image&, const Image&, Image*, Image*) const {
    throw ContractError("flow predictor '" + name() + "' is not differentiable");
}

FlowPredictor::Prediction LkFlowPredictor::predict(const Image& cur, const Image& prev,
                                                   int) const {
    auto ctx = std::make_shared<LkContext>();
    Prediction p;
    p.flow = lk_flow(prev, cur, options_, ctx.get());
    p.ctx = std::move(ctx);
    return p;
}

void LkFlowPredictor::backward(const Prediction& prediction, const Image& grad_u,
                               const Image& grad_v, Image* grad_cur, Image* grad_prev) const {
    const auto* ctx = static_cast<const LkContext*>(prediction.ctx.get());
    require(ctx != nullptr, "LkFlowPredictor::backward: prediction lacks context");
    // lk_flow ran as (frame_a = prev, frame_b = cur).
    lk_flow_backward(*ctx, grad_u, grad_v, grad_prev, grad_cur);
}

FlowPredictor::Prediction StoredFlowPredictor::predict(const Image& cur, const Image&,
                                                       int pair_index) const {
    Prediction p;
    if (pair_index == 0) {
        p.flow.u = Image(cur.height(), cur.width(), 1);
        p.flow.v = Image(cur.height(), cur.width(), 1);
        p.flow.valid = Image(cur.height(), cur.width(), 1, 1.0);
        return p;
    }
    require(pair_index > 0 && pair_index < static_cast<int>(flows_.size()),
            "StoredFlowPredictor: pair index out of range");
    p.flow = flows_[pair_index];
    return p;
}

double charbonnier(const Image& residual_u, const Image& residual_v, const Image& valid,
                   double eps, Image* grad_u, Image* grad_v) {
    require(eps > 0, "charbonnier: eps must be positive");
    require(residual_u.same_shape(residual_v), "charbonnier: residual shape mismatch");
    size_t n = 0;
    for (size_t i = 0; i < residual_u.size(); ++i) {
        if (valid.empty() || valid.raw()[i] != 0.0) ++n;
    }
    if (n == 0) return 0.0;
    double loss = 0.0;
    for (size_t i = 0; i < residual_u.size(); ++i) {
        if (!valid.empty() && valid.raw()[i] == 0.0) continue;
        double ru = residual_u.raw()[i], rv = residual_v.raw()[i];
        double root = std::sqrt(ru * ru + rv * rv + eps * eps);
        loss += root - eps;
        if (grad_u) grad_u->raw()[i] += ru / (root * n);
        if (grad_v) grad_v->raw()[i] += rv / (root * n);
    }
    return loss / static_cast<double>(n);
}

ThfResult thf_loss(const Image& rendered_cur, const Image& rendered_prev, const Image& gt_cur,
                   const Image& gt_prev, const Image& mask_cur, const Image& mask_prev,
                   int pair_index, const FlowPredictor& rendered_predictor,
                   const FlowPredictor& gt_predictor, const ThfConfig& config,
                   bool need_gradients) {
    require(rendered_cur.same_shape(gt_cur) && rendered_prev.same_shape(gt_prev),
            "thf_loss: rendered/gt shape mismatch");
    if (need_gradients && !rendered_predictor.differentiable()) {
        throw ConfigError("flow predictor '" + rendered_predictor.name() +
                          "' cannot provide gradients for the rendered branch");
    }
    const int H = rendered_cur.height(), W = rendered_cur.width();

    // Pixels masked in either frame of the pair drop out of both terms.
    Image valid(H, W, 1, 1.0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            bool masked = (!mask_cur.empty() && mask_cur.at(y, x, 0) != 0.0) ||
                          (!mask_prev.empty() && mask_prev.at(y, x, 0) != 0.0);
            if (masked) valid.at(y, x, 0) = 0.0;
        }
    }

    FlowPredictor::Prediction fr = rendered_predictor.predict(rendered_cur, rendered_prev,
                                                              pair_index);
    FlowPredictor::Prediction fg = gt_predictor.predict(gt_cur, gt_prev, pair_index);

    Image valid_char = valid;
    for (size_t i = 0; i < valid_char.size(); ++i) {
        if (fr.flow.valid.raw()[i] == 0.0 || fg.flow.valid.raw()[i] == 0.0) {
            valid_char.raw()[i] = 0.0;
        }
    }

    Image ru(H, W, 1), rv(H, W, 1);
    for (size_t i = 0; i < ru.size(); ++i) {
        ru.raw()[i] = fr.flow.u.raw()[i] - fg.flow.u.raw()[i];
        rv.raw()[i] = fr.flow.v.raw()[i] - fg.flow.v.raw()[i];
    }

    ThfResult res;
    if (need_gradients) {
        res.grad_rendered_cur = Image(H, W, rendered_cur.channels());
        res.grad_rendered_prev = Image(H, W, rendered_prev.channels());
        Image dflow_u(H, W, 1), dflow_v(H, W, 1);
        res.charbonnier_term =
            charbonnier(ru, rv, valid_char, config.charbonnier_eps, &dflow_u, &dflow_v);
        rendered_predictor.backward(fr, dflow_u, dflow_v, &res.grad_rendered_cur,
                                    &res.grad_rendered_prev);
        res.census_term = census_loss(rendered_cur, gt_cur, config.census, valid,
                                      &res.grad_rendered_cur);
    } else {
        res.charbonnier_term =
            charbonnier(ru, rv, valid_char, config.charbonnier_eps, nullptr, nullptr);
        res.census_term = census_loss(rendered_cur, gt_cur, config.census, valid, nullptr);
    }
    res.loss = res.charbonnier_term + res.census_term;
    return res;
}

}  // namespace fsplat
