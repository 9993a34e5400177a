#include "sf/losses.hpp"

#include <cmath>

#include "sf/common.hpp"

namespace sf {

void LossWeights::validate() const {
    require(w_ph >= 0 && w_co >= 0 && w_st >= 0 && w_sz >= 0 && w_sm >= 0 && w_tp >= 0,
            "loss weights must be nonnegative");
}

NodePtr supervised_l0(NodePtr d0, const Tensor& d_gt) {
    require(d0->value.same_shape(d_gt), "supervised_l0: shape mismatch");
    Tensor inv_gt = d_gt;
    for (double& v : inv_gt.data) {
        require(v > 0.0, "supervised_l0: ground truth must be positive everywhere");
        v = 1.0 / v;
    }
    NodePtr diff = abs_node(sub(std::move(d0), make_const(d_gt)));
    return mean_all(mul_const(std::move(diff), std::move(inv_gt)));
}

NodePtr ssim_map(NodePtr a, NodePtr b) {
    require(a->value.same_shape(b->value), "ssim: shape mismatch");
    NodePtr mu_a = avgpool3_same(a);
    NodePtr mu_b = avgpool3_same(b);
    NodePtr mu_aa = avgpool3_same(mul(a, a));
    NodePtr mu_bb = avgpool3_same(mul(b, b));
    NodePtr mu_ab = avgpool3_same(mul(a, b));
    NodePtr var_a = sub(mu_aa, mul(mu_a, mu_a));
    NodePtr var_b = sub(mu_bb, mul(mu_b, mu_b));
    NodePtr cov = sub(mu_ab, mul(mu_a, mu_b));

    NodePtr num = mul(add_scalar(mul_scalar(mul(mu_a, mu_b), 2.0), kSsimC1),
                      add_scalar(mul_scalar(cov, 2.0), kSsimC2));
    NodePtr den = mul(add_scalar(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), kSsimC1),
                      add_scalar(add(var_a, var_b), kSsimC2));
    return divide(std::move(num), std::move(den));
}

NodePtr photometric_loss(const Tensor& I_t, const std::vector<WarpResult>& recons, double w_co,
                         double w_st) {
    require(!recons.empty(), "photometric_loss: no reconstructions");
    NodePtr numerator;
    double count = 0.0;
    NodePtr target = make_const(I_t);
    for (const WarpResult& r : recons) {
        require(r.image->value.same_shape(I_t), "photometric_loss: shape mismatch");
        count += r.validity.sum();
        NodePtr l1 = mean_c(abs_node(sub(r.image, target)));
        NodePtr dssim = add_scalar(mul_scalar(mean_c(ssim_map(r.image, target)), -1.0), 1.0);
        NodePtr term = add(mul_scalar(std::move(l1), w_co), mul_scalar(std::move(dssim), w_st));
        NodePtr part = masked_sum(std::move(term), r.validity);
        numerator = numerator ? add(std::move(numerator), std::move(part)) : std::move(part);
    }
    require(count > 0.0, "photometric_loss: degenerate warp, no valid pixels");
    return mul_scalar(std::move(numerator), 1.0 / count);
}

NodePtr sparse_consistency_loss(NodePtr d, const SparseDepthMap& z) {
    require(d->value.same_shape(z.values), "sparse_consistency_loss: shape mismatch");
    const double count = z.validity.sum();
    require(count > 0.0, "sparse_consistency_loss: empty sparse domain");
    NodePtr diff = abs_node(sub(std::move(d), make_const(z.values)));
    return mul_scalar(masked_sum(std::move(diff), z.validity), 1.0 / count);
}

NodePtr fwd_diff_x(NodePtr a) {
    const Tensor& av = a->value;
    Tensor v = Tensor::hwc(av.h, av.w, av.c);
    for (int y = 0; y < av.h; ++y)
        for (int x = 0; x + 1 < av.w; ++x)
            for (int ch = 0; ch < av.c; ++ch) v.at(y, x, ch) = av.at(y, x + 1, ch) - av.at(y, x, ch);
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->inputs = {std::move(a)};
    n->requires_grad = n->inputs[0]->requires_grad;
    if (n->requires_grad) {
        n->backward = [](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            for (int y = 0; y < go.h; ++y)
                for (int x = 0; x + 1 < go.w; ++x)
                    for (int ch = 0; ch < go.c; ++ch) {
                        gi[0]->at(y, x + 1, ch) += go.at(y, x, ch);
                        gi[0]->at(y, x, ch) -= go.at(y, x, ch);
                    }
        };
    }
    return n;
}

NodePtr fwd_diff_y(NodePtr a) {
    const Tensor& av = a->value;
    Tensor v = Tensor::hwc(av.h, av.w, av.c);
    for (int y = 0; y + 1 < av.h; ++y)
        for (int x = 0; x < av.w; ++x)
            for (int ch = 0; ch < av.c; ++ch) v.at(y, x, ch) = av.at(y + 1, x, ch) - av.at(y, x, ch);
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->inputs = {std::move(a)};
    n->requires_grad = n->inputs[0]->requires_grad;
    if (n->requires_grad) {
        n->backward = [](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            for (int y = 0; y + 1 < go.h; ++y)
                for (int x = 0; x < go.w; ++x)
                    for (int ch = 0; ch < go.c; ++ch) {
                        gi[0]->at(y + 1, x, ch) += go.at(y, x, ch);
                        gi[0]->at(y, x, ch) -= go.at(y, x, ch);
                    }
        };
    }
    return n;
}

namespace {

// exp(-mean_c |forward difference of I|) along one axis.
Tensor edge_weights(const Tensor& I, bool along_x) {
    Tensor w = Tensor::hwc(I.h, I.w, 1);
    for (int y = 0; y < I.h; ++y)
        for (int x = 0; x < I.w; ++x) {
            double g = 0.0;
            if (along_x ? x + 1 < I.w : y + 1 < I.h) {
                for (int ch = 0; ch < I.c; ++ch)
                    g += std::fabs((along_x ? I.at(y, x + 1, ch) : I.at(y + 1, x, ch)) - I.at(y, x, ch));
                g /= I.c;
            }
            w.at(y, x, 0) = std::exp(-g);
        }
    return w;
}

}  // namespace

NodePtr smoothness_loss(NodePtr d, const Tensor& I_t) {
    require(d->value.h == I_t.h && d->value.w == I_t.w, "smoothness_loss: shape mismatch");
    require(d->value.c == 1, "smoothness_loss: depth must be single channel");
    const double inv_n = 1.0 / (static_cast<double>(I_t.h) * I_t.w);
    NodePtr tx = masked_sum(abs_node(fwd_diff_x(d)), edge_weights(I_t, true));
    NodePtr ty = masked_sum(abs_node(fwd_diff_y(d)), edge_weights(I_t, false));
    return mul_scalar(add(std::move(tx), std::move(ty)), inv_n);
}

PriorMask prior_mask(const Tensor& I_t, const std::vector<WarpResult>& recon_pred,
                     const std::vector<WarpResult>& recon_prior) {
    require(!recon_pred.empty() && recon_pred.size() == recon_prior.size(),
            "prior_mask: reconstruction lists must match");
    const int h = I_t.h, w = I_t.w, c = I_t.c;
    PriorMask pm;
    pm.delta = Tensor::hwc(h, w, 1);
    pm.delta0 = Tensor::hwc(h, w, 1);
    pm.w = Tensor::hwc(h, w, 1);
    Tensor valid = Tensor::hwc(h, w, 1, 1.0);
    const double inv = 1.0 / (c * static_cast<double>(recon_pred.size()));
    for (std::size_t k = 0; k < recon_pred.size(); ++k) {
        const Tensor& rp = recon_pred[k].image->value;
        const Tensor& rq = recon_prior[k].image->value;
        require(rp.same_shape(I_t) && rq.same_shape(I_t), "prior_mask: shape mismatch");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (recon_pred[k].validity.at(y, x, 0) == 0.0 ||
                    recon_prior[k].validity.at(y, x, 0) == 0.0)
                    valid.at(y, x, 0) = 0.0;
                double dp = 0, dq = 0;
                for (int ch = 0; ch < c; ++ch) {
                    dp += std::fabs(I_t.at(y, x, ch) - rp.at(y, x, ch));
                    dq += std::fabs(I_t.at(y, x, ch) - rq.at(y, x, ch));
                }
                pm.delta.at(y, x, 0) += dp * inv;
                pm.delta0.at(y, x, 0) += dq * inv;
            }
    }
    double cover = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (valid.at(y, x, 0) != 0.0 && pm.delta.at(y, x, 0) > pm.delta0.at(y, x, 0)) {
                pm.w.at(y, x, 0) = 1.0;
                cover += 1.0;
            }
    pm.coverage = cover / (static_cast<double>(h) * w);
    return pm;
}

NodePtr topology_prior_loss(NodePtr d, const Tensor& d0, const PriorMask& mask) {
    require(d->value.same_shape(d0), "topology_prior_loss: shape mismatch");
    const double count = mask.w.sum();
    if (count == 0.0) return make_const(Tensor::scalar(0.0));
    NodePtr diff = abs_node(sub(std::move(d), make_const(d0)));
    return mul_scalar(masked_sum(std::move(diff), mask.w), 1.0 / count);
}

TotalLoss total_loss(const StageTwoParts& parts, const LossWeights& weights, long step,
                     long tp_start_step) {
    weights.validate();
    require(parts.l_ph && parts.l_sz && parts.l_sm, "total_loss: missing loss parts");
    TotalLoss out;
    out.report.l_ph = scalar_of(parts.l_ph);
    out.report.l_sz = scalar_of(parts.l_sz);
    out.report.l_sm = scalar_of(parts.l_sm);
    out.report.l_tp = parts.l_tp ? scalar_of(parts.l_tp) : 0.0;
    out.report.w_coverage = parts.w_coverage;
    out.report.tp_active = step >= tp_start_step;

    NodePtr total = add(add(mul_scalar(parts.l_ph, weights.w_ph), mul_scalar(parts.l_sz, weights.w_sz)),
                        mul_scalar(parts.l_sm, weights.w_sm));
    if (out.report.tp_active && parts.l_tp)
        total = add(std::move(total), mul_scalar(parts.l_tp, weights.w_tp));
    out.total = std::move(total);
    out.report.total = scalar_of(out.total);
    return out;
}

}  // namespace sf
