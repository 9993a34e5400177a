#pragma once

// Finite-difference verification of the stage-2 losses with respect to the
// predicted depth map. Pixels whose loss terms sit within a margin of a
// non-differentiable point (bilinear cell boundaries, absolute-value kinks,
// validity flips, W flips) are excluded from the comparison; everything else
// must match central differences tightly.

#include <cmath>
#include <functional>
#include <vector>

#include "sf/losses.hpp"
#include "sf/rng.hpp"
#include "sf/warp.hpp"
#include "testutil.hpp"

namespace sftest {

struct LossInstance {
    sf::Tensor I_t;
    std::vector<sf::Tensor> I_tau;
    std::vector<sf::Pose> poses;
    sf::Intrinsics K;
    sf::Tensor d;   // prediction under test
    sf::Tensor d0;  // topology prior
    sf::SparseDepthMap z;
};

inline LossInstance make_loss_instance(std::uint64_t seed, int h, int w) {
    sf::Rng rng(seed);
    LossInstance li;
    li.K.width = w;
    li.K.height = h;
    li.K.fx = li.K.fy = 1.1 * w;
    li.K.cx = 0.5 * (w - 1);
    li.K.cy = 0.5 * (h - 1);
    li.I_t = smooth_image(h, w, 3, rng);
    li.d = smooth_depth(h, w, 2.0, rng);
    li.d0 = smooth_depth(h, w, 2.1, rng);
    for (int k = 0; k < 2; ++k) {
        li.I_tau.push_back(smooth_image(h, w, 3, rng));
        sf::Pose p;
        p.rotation = sf::rodrigues(
            {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)});
        // Translations big enough to spread warp coordinates across bilinear
        // cells (near-integer coordinates would starve the checkable set).
        auto tr = [&rng] {
            const double mag = rng.uniform(0.04, 0.12);
            return rng.uniform() < 0.5 ? -mag : mag;
        };
        p.translation = {tr(), tr(), tr()};
        li.poses.push_back(p);
    }
    li.z.values = sf::Tensor::hwc(h, w, 1);
    li.z.validity = sf::Tensor::hwc(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (rng.uniform() < 0.12) {
                const double zv = li.d.at(y, x, 0) + rng.uniform(0.05, 0.3) *
                                                          (rng.uniform() < 0.5 ? -1.0 : 1.0);
                if (zv <= 0.05) continue;
                li.z.values.at(y, x, 0) = zv;
                li.z.validity.at(y, x, 0) = 1.0;
            }
    return li;
}

// Safety margins for one depth map against the warp chain.
inline sf::Tensor warp_safety(const LossInstance& li, const sf::Tensor& depth, double lattice_margin,
                              double border_margin, double l1_margin) {
    const int h = depth.h, w = depth.w;
    sf::Tensor safe = sf::Tensor::hwc(h, w, 1, 1.0);
    const sf::PixelGrid grid = sf::PixelGrid::make(w, h);
    for (std::size_t k = 0; k < li.I_tau.size(); ++k) {
        sf::Tensor coords, front;
        sf::project(sf::transform(li.poses[k], sf::backproject(grid, depth, li.K)), li.K, coords,
                    front);
        sf::Tensor warped, mask;
        sf::bilinear_sample(li.I_tau[k], coords, warped, mask);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (front.at(y, x, 0) == 0.0 || mask.at(y, x, 0) == 0.0) {
                    safe.at(y, x, 0) = 0.0;
                    continue;
                }
                const double u = coords.at(y, x, 0), v = coords.at(y, x, 1);
                if (u < border_margin || u > w - 1 - border_margin || v < border_margin ||
                    v > h - 1 - border_margin) {
                    safe.at(y, x, 0) = 0.0;
                    continue;
                }
                const double fu = u - std::floor(u), fv = v - std::floor(v);
                if (fu < lattice_margin || fu > 1 - lattice_margin || fv < lattice_margin ||
                    fv > 1 - lattice_margin) {
                    safe.at(y, x, 0) = 0.0;
                    continue;
                }
                if (l1_margin > 0)
                    for (int ch = 0; ch < 3; ++ch)
                        if (std::fabs(warped.at(y, x, ch) - li.I_t.at(y, x, ch)) < l1_margin)
                            safe.at(y, x, 0) = 0.0;
            }
    }
    return safe;
}

struct GradCheckStats {
    int checked = 0;
    int failed = 0;
    double max_rel_err = 0.0;
    double coverage = 0.0;  // checked / pixels
};

// which: "ph", "sz", "sm", "tp".
inline GradCheckStats check_loss_gradient(const LossInstance& li, const std::string& which,
                                          double tol = 1e-4) {
    const int h = li.d.h, w = li.d.w;
    const double h_step = 1e-3 * 2.0;  // 1e-3 x depth scale

    auto build = [&](sf::NodePtr dn) -> sf::NodePtr {
        if (which == "ph") {
            std::vector<sf::WarpResult> recons;
            for (std::size_t k = 0; k < li.I_tau.size(); ++k)
                recons.push_back(
                    sf::reconstruct_node(li.I_tau[k], dn, li.K, sf::pose_nodes_from(li.poses[k])));
            return sf::photometric_loss(li.I_t, recons, 0.15, 0.85);
        }
        if (which == "sz") return sf::sparse_consistency_loss(dn, li.z);
        if (which == "sm") return sf::smoothness_loss(dn, li.I_t);
        // tp: reconstructions of both depth maps feed the mask.
        std::vector<sf::WarpResult> rp, rq;
        for (std::size_t k = 0; k < li.I_tau.size(); ++k) {
            rp.push_back(sf::reconstruct_node(li.I_tau[k], dn, li.K,
                                              sf::pose_nodes_from(li.poses[k])));
            rq.push_back(sf::reconstruct_node(li.I_tau[k], sf::make_const(li.d0), li.K,
                                              sf::pose_nodes_from(li.poses[k])));
        }
        const sf::PriorMask pm = sf::prior_mask(li.I_t, rp, rq);
        return sf::topology_prior_loss(dn, li.d0, pm);
    };

    sf::NodePtr leaf = sf::make_leaf(li.d, true);
    sf::Gradients g = sf::backward(build(leaf));
    const sf::Tensor* gd = g.find(leaf);

    auto eval = [&](const sf::Tensor& d) { return sf::scalar_of(build(sf::make_const(d))); };

    // Per-loss safety mask.
    sf::Tensor safe = sf::Tensor::hwc(h, w, 1, 1.0);
    if (which == "ph") {
        safe = warp_safety(li, li.d, 0.05, 0.6, 2e-3);
    } else if (which == "sz") {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (li.z.validity.at(y, x, 0) != 0.0 &&
                    std::fabs(li.d.at(y, x, 0) - li.z.values.at(y, x, 0)) < 1e-2)
                    safe.at(y, x, 0) = 0.0;
    } else if (which == "sm") {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                auto diff_small = [&](int y0, int x0, int y1, int x1) {
                    if (y1 >= h || x1 >= w) return false;
                    return std::fabs(li.d.at(y1, x1, 0) - li.d.at(y0, x0, 0)) < 1e-2;
                };
                if ((x + 1 < w && diff_small(y, x, y, x + 1)) ||
                    (x > 0 && diff_small(y, x - 1, y, x)) ||
                    (y + 1 < h && diff_small(y, x, y + 1, x)) ||
                    (y > 0 && diff_small(y - 1, x, y, x)))
                    safe.at(y, x, 0) = 0.0;
            }
    } else if (which == "tp") {
        const sf::Tensor warp_ok = warp_safety(li, li.d, 0.05, 0.6, 0.0);
        // W must be stable under the FD step and |d - d0| clear of its kink.
        std::vector<sf::WarpResult> rp, rq;
        for (std::size_t k = 0; k < li.I_tau.size(); ++k) {
            rp.push_back(sf::reconstruct_node(li.I_tau[k], sf::make_const(li.d), li.K,
                                              sf::pose_nodes_from(li.poses[k])));
            rq.push_back(sf::reconstruct_node(li.I_tau[k], sf::make_const(li.d0), li.K,
                                              sf::pose_nodes_from(li.poses[k])));
        }
        const sf::PriorMask pm = sf::prior_mask(li.I_t, rp, rq);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (warp_ok.at(y, x, 0) == 0.0 ||
                    std::fabs(pm.delta.at(y, x, 0) - pm.delta0.at(y, x, 0)) < 1e-3 ||
                    std::fabs(li.d.at(y, x, 0) - li.d0.at(y, x, 0)) < 1e-2)
                    safe.at(y, x, 0) = 0.0;
            }
    }

    GradCheckStats stats;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (safe.at(y, x, 0) == 0.0) continue;
            const std::size_t i = li.d.idx(y, x, 0);
            const double fd = central_diff(eval, li.d, i, h_step);
            const double analytic = gd ? (*gd)[i] : 0.0;
            const double re = rel_err(analytic, fd);
            stats.max_rel_err = std::max(stats.max_rel_err, re);
            if (re > tol) ++stats.failed;
            ++stats.checked;
        }
    stats.coverage = static_cast<double>(stats.checked) / (h * w);
    return stats;
}

}  // namespace sftest
