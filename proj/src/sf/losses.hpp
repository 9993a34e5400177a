#pragma once

#include <vector>

#include "sf/sampling.hpp"
#include "sf/warp.hpp"

namespace sf {

struct LossWeights {
    double w_ph = 1.00;
    double w_co = 0.20;
    double w_st = 0.40;
    double w_sz = 0.10;
    double w_sm = 0.01;
    double w_tp = 0.10;

    static LossWeights scanline_preset() { return {}; }
    static LossWeights corner_preset() {
        LossWeights w;
        w.w_sz = 1.00;
        w.w_sm = 0.40;
        return w;
    }
    void validate() const;
};

struct LossReport {
    double l0 = 0.0;  // stage-1 supervised term
    double l_ph = 0.0, l_sz = 0.0, l_sm = 0.0, l_tp = 0.0;
    double total = 0.0;
    double w_coverage = 0.0;  // fraction of pixels with W = 1
    bool tp_active = false;
};

// Stage-1 objective: mean over all pixels of |d0 - gt| / gt. Rejects any
// non-positive ground truth.
NodePtr supervised_l0(NodePtr d0, const Tensor& d_gt);

// Per-pixel, per-channel SSIM with 3x3 local statistics.
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
NodePtr ssim_map(NodePtr a, NodePtr b);

// Mean over adjacent frames and valid pixels of
// w_co * |I_hat - I_t| + w_st * (1 - SSIM); invalid pixels leave both the
// numerator and the denominator. Rejects a warp with zero valid pixels.
NodePtr photometric_loss(const Tensor& I_t, const std::vector<WarpResult>& recons, double w_co,
                         double w_st);

// Mean L1 between the prediction and the sparse measurements on their domain.
NodePtr sparse_consistency_loss(NodePtr d, const SparseDepthMap& z);

// Edge-aware first-order smoothness; forward differences, exp(-|dI|) weights
// with color gradients reduced by channel mean.
NodePtr smoothness_loss(NodePtr d, const Tensor& I_t);

// Indicator W = 1 where the prediction reconstructs the image worse than the
// topology prior does. Discrepancies are averaged over color channels and
// over both adjacent frames; pixels with any invalid reconstruction get W=0.
struct PriorMask {
    Tensor w;       // (h,w,1) in {0,1}
    Tensor delta;   // discrepancy of the prediction
    Tensor delta0;  // discrepancy of the prior
    double coverage = 0.0;
};
PriorMask prior_mask(const Tensor& I_t, const std::vector<WarpResult>& recon_pred,
                     const std::vector<WarpResult>& recon_prior);

// Masked pull toward the prior: sum(W |d - d0|) / sum(W); 0 on an empty mask.
// The prior is a fixed target (no gradient).
NodePtr topology_prior_loss(NodePtr d, const Tensor& d0, const PriorMask& mask);

struct StageTwoParts {
    NodePtr l_ph, l_sz, l_sm, l_tp;  // l_tp may be null when the mask is empty
    double w_coverage = 0.0;
};

struct TotalLoss {
    NodePtr total;
    LossReport report;
};

// L = w_ph*l_ph + w_sz*l_sz + w_sm*l_sm + (step >= tp_start ? w_tp*l_tp : 0).
TotalLoss total_loss(const StageTwoParts& parts, const LossWeights& weights, long step,
                     long tp_start_step);

// Forward differences with zero last column/row (shared by smoothness).
NodePtr fwd_diff_x(NodePtr a);
NodePtr fwd_diff_y(NodePtr a);

}  // namespace sf
