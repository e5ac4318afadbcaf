#include "fsplat/objective.hpp"

#include <cmath>

#include "fsplat/errors.hpp"

namespace fsplat {

MaskedL1Result masked_l1(const Image& gt, const Image& rendered, const Image& mask) {
    require(gt.same_shape(rendered), "masked_l1: image shape mismatch");
    if (!mask.empty()) {
        require(mask.height() == gt.height() && mask.width() == gt.width() && mask.channels() == 1,
                "masked_l1: mask shape mismatch");
    }
    MaskedL1Result res;
    res.grad_rendered = Image(gt.height(), gt.width(), gt.channels());
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!mask.empty() && mask.at(y, x, 0) != 0.0) continue;
            for (int c = 0; c < gt.channels(); ++c) {
                double r = rendered.at(y, x, c) - gt.at(y, x, c);
                res.loss += std::abs(r);
                res.grad_rendered.at(y, x, c) = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
            }
        }
    }
    return res;
}

DepthHuberResult depth_huber(const Image& gt, const Image& rendered, const Image& mask,
                             double delta) {
    require(gt.same_shape(rendered), "depth_huber: shape mismatch");
    require(delta > 0, "depth_huber: delta must be positive");
    DepthHuberResult res;
    res.grad_rendered = Image(gt.height(), gt.width(), 1);
    size_t n = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!mask.empty() && mask.at(y, x, 0) != 0.0) continue;
            ++n;
        }
    }
    if (n == 0) return res;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!mask.empty() && mask.at(y, x, 0) != 0.0) continue;
            double r = rendered.at(y, x, 0) - gt.at(y, x, 0);
            if (std::abs(r) <= delta) {
                res.loss += 0.5 * r * r / delta;
                res.grad_rendered.at(y, x, 0) = r / (delta * n);
            } else {
                res.loss += std::abs(r) - 0.5 * delta;
                res.grad_rendered.at(y, x, 0) = (r > 0 ? 1.0 : -1.0) / n;
            }
        }
    }
    res.loss /= static_cast<double>(n);
    return res;
}

double tv_loss(const HexPlanes& planes, HexPlanes* grad) {
    size_t n_pairs = 0;
    for (const auto& level : planes.levels) {
        for (const PlaneGrid& p : level) {
            n_pairs += static_cast<size_t>(p.n1 - 1) * p.n2 * p.width;
            n_pairs += static_cast<size_t>(p.n1) * (p.n2 - 1) * p.width;
        }
    }
    if (n_pairs == 0) return 0.0;
    double sum = 0.0;
    for (size_t l = 0; l < planes.levels.size(); ++l) {
        for (int p = 0; p < 6; ++p) {
            const PlaneGrid& g = planes.levels[l][p];
            PlaneGrid* gg = grad ? &grad->levels[l][p] : nullptr;
            for (int i = 0; i < g.n1; ++i) {
                for (int j = 0; j < g.n2; ++j) {
                    const double* f = g.node(i, j);
                    for (int c = 0; c < g.width; ++c) {
                        if (i + 1 < g.n1) {
                            double d = g.node(i + 1, j)[c] - f[c];
                            sum += d * d;
                            if (gg) {
                                gg->node(i + 1, j)[c] += 2 * d / n_pairs;
                                gg->node(i, j)[c] -= 2 * d / n_pairs;
                            }
                        }
                        if (j + 1 < g.n2) {
                            double d = g.node(i, j + 1)[c] - f[c];
                            sum += d * d;
                            if (gg) {
                                gg->node(i, j + 1)[c] += 2 * d / n_pairs;
                                gg->node(i, j)[c] -= 2 * d / n_pairs;
                            }
                        }
                    }
                }
            }
        }
    }
    return sum / static_cast<double>(n_pairs);
}

ObjectiveResult total_loss(const Image& gt_image, const Image& gt_depth, const Image& mask,
                           const Image& rendered_image, const Image& rendered_depth,
                           const Image& rendered_alpha, const Image* shf_weights,
                           const HexPlanes* field_planes, const ThfFrameInputs& thf_inputs,
                           const ObjectiveOptions& options) {
    const LossWeights& w = options.weights;
    ObjectiveResult res;

    MaskedL1Result l1 = masked_l1(gt_image, rendered_image, mask);
    res.report.l1 = l1.loss;
    res.grad_image = std::move(l1.grad_rendered);

    if (options.enable_depth && w.lambda_d > 0) {
        require(!gt_depth.empty(), "total_loss: depth term enabled but no ground-truth depth");
        const int H = gt_depth.height(), W = gt_depth.width();
        // Skip tool pixels, empty renders, and missing sensor readings.
        Image depth_mask(H, W, 1, 0.0);
        Image gt_scaled(H, W, 1), rendered_scaled(H, W, 1);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                bool excluded = (!mask.empty() && mask.at(y, x, 0) != 0.0) ||
                                rendered_alpha.at(y, x, 0) < options.depth_alpha_min ||
                                gt_depth.at(y, x, 0) <= 0.0;
                depth_mask.at(y, x, 0) = excluded ? 1.0 : 0.0;
                gt_scaled.at(y, x, 0) =
                    gt_depth.at(y, x, 0) * rendered_alpha.at(y, x, 0) / options.depth_p95;
                rendered_scaled.at(y, x, 0) = rendered_depth.at(y, x, 0) / options.depth_p95;
            }
        }
        DepthHuberResult dh = depth_huber(gt_scaled, rendered_scaled, depth_mask,
                                          options.depth_delta);
        res.report.depth = dh.loss;
        res.grad_depth = Image(H, W, 1);
        res.grad_alpha = Image(H, W, 1);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double g = w.lambda_d * dh.grad_rendered.at(y, x, 0);
                res.grad_depth.at(y, x, 0) = g / options.depth_p95;
                res.grad_alpha.at(y, x, 0) = -g * gt_depth.at(y, x, 0) / options.depth_p95;
            }
        }
    }

    if (options.enable_shf && w.lambda_shf > 0) {
        ShfResult shf = shf_weights
                            ? shf_loss_with_weights(*shf_weights, gt_image, rendered_image)
                            : shf_loss(gt_image, rendered_image, options.shf_radius_ratio);
        res.report.shf = shf.loss;
        for (size_t i = 0; i < res.grad_image.size(); ++i) {
            res.grad_image.raw()[i] += w.lambda_shf * shf.grad_rendered.raw()[i];
        }
    }

    if (options.enable_thf && w.lambda_thf > 0 && thf_inputs.enabled) {
        require(thf_inputs.rendered_prev && thf_inputs.gt_prev && thf_inputs.rendered_predictor &&
                    thf_inputs.gt_predictor,
                "total_loss: incomplete thf inputs");
        static const Image kNoMask;
        ThfResult thf = thf_loss(rendered_image, *thf_inputs.rendered_prev, gt_image,
                                 *thf_inputs.gt_prev, mask,
                                 thf_inputs.mask_prev ? *thf_inputs.mask_prev : kNoMask,
                                 thf_inputs.pair_index, *thf_inputs.rendered_predictor,
                                 *thf_inputs.gt_predictor, options.thf, true);
        res.report.thf = thf.loss;
        for (size_t i = 0; i < res.grad_image.size(); ++i) {
            res.grad_image.raw()[i] += w.lambda_thf * thf.grad_rendered_cur.raw()[i];
        }
        res.grad_image_prev = Image(gt_image.height(), gt_image.width(), gt_image.channels());
        for (size_t i = 0; i < res.grad_image_prev.size(); ++i) {
            res.grad_image_prev.raw()[i] = w.lambda_thf * thf.grad_rendered_prev.raw()[i];
        }
    }

    if (options.enable_tv && w.lambda_tv > 0 && field_planes) {
        res.tv_grads.zero_like(*field_planes);
        res.report.tv = tv_loss(*field_planes, &res.tv_grads);
        res.has_tv = true;
        // Fold the weight in so downstream accumulation is uniform.
        for (auto& level : res.tv_grads.levels) {
            for (PlaneGrid& p : level) {
                for (double& x : p.data) x *= w.lambda_tv;
            }
        }
    }

    res.report.total = res.report.l1 + w.lambda_d * res.report.depth + w.lambda_tv * res.report.tv +
                       w.lambda_shf * res.report.shf + w.lambda_thf * res.report.thf;
    return res;
}

}  // namespace fsplat
