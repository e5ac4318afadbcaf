#pragma once

#include <vector>

#include "fsplat/image.hpp"

namespace fsplat {

// Dense pixel displacements taking frame content from the earlier frame to
// the later one.
struct FlowField {
    Image u;      // H x W x 1
    Image v;      // H x W x 1
    Image valid;  // H x W x 1 binary
};

struct LkOptions {
    int levels = 3;
    int window = 7;        // odd, structure-tensor window side
    int iterations = 3;    // solver refinements per pyramid level
    double tikhonov = 1e-3;
};

struct LkIterState {
    Image flow_u_in, flow_v_in;
    Image it;         // warped B minus A at this iterate
    Image sxt, syt;   // windowed gradient-residual sums
};

struct LkLevelState {
    Image a, b;             // pyramid frames, grayscale
    Image ix, iy;           // template (A) gradients
    Image m00, m01, m11;    // inverse regularized structure tensor
    std::vector<LkIterState> iters;
};

struct LkContext {
    LkOptions options;
    int channels_a = 0, channels_b = 0;
    std::vector<LkLevelState> levels;  // [0] is full resolution
};

// Coarse-to-fine Lucas-Kanade: flow such that frame_a content appears in
// frame_b at position + flow. Template gradients and the regularized 2x2
// normal-equation inverse come from frame_a; each refinement warps frame_b by
// the current flow. Constant frames produce exactly zero flow. valid is all
// ones. ctx captures what the backward pass needs and may be null.
FlowField lk_flow(const Image& frame_a, const Image& frame_b, const LkOptions& options,
                  LkContext* ctx = nullptr);

// Accumulates d(scalar)/d(frame pixels) given gradients on the output flow.
// Either output may be null.
void lk_flow_backward(const LkContext& ctx, const Image& grad_u, const Image& grad_v,
                      Image* grad_frame_a, Image* grad_frame_b);

}  // namespace fsplat
