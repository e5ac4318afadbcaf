#pragma once

#include <string>

#include "fsplat/hexplane.hpp"
#include "fsplat/image.hpp"
#include "fsplat/shf.hpp"
#include "fsplat/thf.hpp"

namespace fsplat {

struct LossWeights {
    double lambda_d = 0.5;
    double lambda_tv = 0.1;
    double lambda_shf = 1.0;
    double lambda_thf = 10.0;
    // The surface-alignment term is out of scope; its weight stays 0. The
    // conventional default it would take is kept for the record.
    double lambda_s = 0.0;
};
constexpr double kInertLambdaSurfaceDefault = 0.2;

struct LossReport {
    int iteration = 0;
    std::string stage = "static";
    double l1 = 0.0;
    double depth = 0.0;
    double tv = 0.0;
    double shf = 0.0;
    double thf = 0.0;
    double total = 0.0;
};

struct MaskedL1Result {
    double loss = 0.0;
    Image grad_rendered;
};

// Sum over unmasked pixels and channels of |rendered - gt|. mask is
// H x W x 1 with 1 marking excluded pixels; empty means nothing excluded.
MaskedL1Result masked_l1(const Image& gt, const Image& rendered, const Image& mask);

struct DepthHuberResult {
    double loss = 0.0;
    Image grad_rendered;
};

// Mean over unmasked pixels of the Huber penalty on (rendered - gt):
// r^2/(2 delta) inside |r| <= delta, |r| - delta/2 outside. Inputs are
// expected pre-normalized to a common scale.
DepthHuberResult depth_huber(const Image& gt, const Image& rendered, const Image& mask,
                             double delta);

// Mean squared difference of adjacent grid nodes along both axes of every
// plane at every level (all feature channels pooled into one mean). grad,
// when non-null, must be zero_like the field and is accumulated into.
double tv_loss(const HexPlanes& planes, HexPlanes* grad);

struct ObjectiveOptions {
    LossWeights weights;
    double shf_radius_ratio = 0.25;
    double depth_delta = 0.2;
    // Per-scene 95th-percentile depth; both depth operands are divided by it.
    double depth_p95 = 1.0;
    // Expected-depth supervision is skipped where the render is this empty.
    double depth_alpha_min = 0.5;
    ThfConfig thf;
    bool enable_depth = true;
    bool enable_shf = true;
    bool enable_thf = true;
    bool enable_tv = true;
};

struct ThfFrameInputs {
    bool enabled = false;
    const Image* rendered_prev = nullptr;
    const Image* gt_prev = nullptr;
    const Image* mask_prev = nullptr;  // may be null
    int pair_index = 0;
    const FlowPredictor* rendered_predictor = nullptr;
    const FlowPredictor* gt_predictor = nullptr;
};

struct ObjectiveResult {
    LossReport report;
    Image grad_image;       // d(total)/d(rendered image), weights applied
    Image grad_depth;       // d(total)/d(raw rendered depth)
    Image grad_alpha;       // d(total)/d(rendered alpha), via the depth term
    Image grad_image_prev;  // d(total)/d(previous rendered image), via thf
    HexPlanes tv_grads;     // d(total)/d(plane features); valid when has_tv
    bool has_tv = false;
};

// Assembles the weighted objective for one frame. A term is evaluated only
// when enabled and its weight is positive, so a zero weight contributes
// exactly nothing to values or gradients. The ground-truth depth operand is
// premultiplied by the rendered alpha so the comparison matches the
// unnormalized expected-depth estimator; that makes alpha itself supervised
// by depth. shf_weights may be null (computed on the fly from gt_image).
ObjectiveResult total_loss(const Image& gt_image, const Image& gt_depth, const Image& mask,
                           const Image& rendered_image, const Image& rendered_depth,
                           const Image& rendered_alpha, const Image* shf_weights,
                           const HexPlanes* field_planes, const ThfFrameInputs& thf_inputs,
                           const ObjectiveOptions& options);

}  // namespace fsplat
