#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fsplat/census.hpp"
#include "fsplat/image.hpp"
#include "fsplat/lucas_kanade.hpp"

namespace fsplat {

// Seam for the flow model: any strategy that produces adjacent-frame flow.
// predict(A, A) must return a zero field.
class FlowPredictor {
public:
    virtual ~FlowPredictor() = default;
    virtual std::string name() const = 0;
    virtual bool differentiable() const = 0;

    struct Prediction {
        FlowField flow;
        std::shared_ptr<void> ctx;  // implementation-owned backward state
    };
    // Flow carrying prev-frame content to its position in cur (the stored
    // earlier-to-later convention). pair_index identifies the frame pair for
    // strategies keyed on the sequence rather than the pixels.
    virtual Prediction predict(const Image& cur, const Image& prev, int pair_index) const = 0;

    // Maps flow gradients back to the input frames. Default: contract error
    // (non-differentiable strategy).
    virtual void backward(const Prediction& prediction, const Image& grad_u, const Image& grad_v,
                          Image* grad_cur, Image* grad_prev) const;
};

class LkFlowPredictor final : public FlowPredictor {
public:
    explicit LkFlowPredictor(const LkOptions& options = {}) : options_(options) {}
    std::string name() const override { return "lk"; }
    bool differentiable() const override { return true; }
    Prediction predict(const Image& cur, const Image& prev, int pair_index) const override;
    void backward(const Prediction& prediction, const Image& grad_u, const Image& grad_v,
                  Image* grad_cur, Image* grad_prev) const override;
    const LkOptions& options() const { return options_; }

private:
    LkOptions options_;
};

// Replays flow fields known by construction (synthetic scenes). pair_index 0
// always yields the zero field, matching the identical-frames contract at the
// start of a sequence; other indices ignore the pixel content entirely.
class StoredFlowPredictor final : public FlowPredictor {
public:
    explicit StoredFlowPredictor(std::vector<FlowField> flows) : flows_(std::move(flows)) {}
    std::string name() const override { return "stored"; }
    bool differentiable() const override { return false; }
    Prediction predict(const Image& cur, const Image& prev, int pair_index) const override;

private:
    std::vector<FlowField> flows_;
};

struct ThfConfig {
    double charbonnier_eps = 1e-3;
    CensusOptions census;
};

// Mean over valid pixels of sqrt(|r|^2 + eps^2) - eps on a 2-vector residual
// field. grad_u/grad_v, when non-null, accumulate the gradient.
double charbonnier(const Image& residual_u, const Image& residual_v, const Image& valid,
                   double eps, Image* grad_u, Image* grad_v);

struct ThfResult {
    double loss = 0.0;
    double charbonnier_term = 0.0;
    double census_term = 0.0;
    Image grad_rendered_cur;
    Image grad_rendered_prev;
};

// Flow-residual Charbonnier plus census, Eq.-style pairing: the flow residual
// compares the predicted flow of the rendered pair against the predicted flow
// of the ground-truth pair; census compares the current rendered frame with
// its ground truth. Pixels masked in either frame of the pair are excluded
// from both terms. The ground-truth branch is constant: no gradient flows
// through it. rendered_predictor must be differentiable when need_gradients.
ThfResult thf_loss(const Image& rendered_cur, const Image& rendered_prev, const Image& gt_cur,
                   const Image& gt_prev, const Image& mask_cur, const Image& mask_prev,
                   int pair_index, const FlowPredictor& rendered_predictor,
                   const FlowPredictor& gt_predictor, const ThfConfig& config,
                   bool need_gradients);

}  // namespace fsplat
