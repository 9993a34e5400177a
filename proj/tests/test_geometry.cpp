#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sf/camera.hpp"
#include "sf/common.hpp"
#include "sf/warp.hpp"
#include "testutil.hpp"

using namespace sf;
using sftest::rel_err;

namespace {

Intrinsics make_k(double fx, double fy, double cx, double cy, int w, int h) {
    Intrinsics k;
    k.fx = fx; k.fy = fy; k.cx = cx; k.cy = cy; k.width = w; k.height = h;
    return k;
}

Pose rot_z_90() {
    Pose p;
    p.rotation = rodrigues({0, 0, 1.5707963267948966});
    return p;
}

}  // namespace

TEST_CASE("backproject: principal-point ray is the optical axis") {
    const Intrinsics k = make_k(30, 28, 4, 3, 9, 7);
    const PixelGrid grid = PixelGrid::make(k.width, k.height);
    Tensor depth = Tensor::hwc(k.height, k.width, 1, 2.7);
    const Tensor pts = backproject(grid, depth, k);
    CHECK(pts.at(3, 4, 0) == doctest::Approx(0.0));
    CHECK(pts.at(3, 4, 1) == doctest::Approx(0.0));
    CHECK(pts.at(3, 4, 2) == doctest::Approx(2.7));
}

TEST_CASE("backproject: unit intrinsics evaluate K^-1 x * d directly") {
    const Intrinsics k = make_k(1, 1, 0, 0, 4, 4);
    const PixelGrid grid = PixelGrid::make(4, 4);
    Tensor depth = Tensor::hwc(4, 4, 1, 2.0);
    const Tensor pts = backproject(grid, depth, k);
    CHECK(pts.at(2, 1, 0) == doctest::Approx(2.0));  // pixel (1,2), depth 2 -> (2,4,2)
    CHECK(pts.at(2, 1, 1) == doctest::Approx(4.0));
    CHECK(pts.at(2, 1, 2) == doctest::Approx(2.0));
}

TEST_CASE("backproject rejects non-positive depth") {
    const Intrinsics k = make_k(10, 10, 2, 2, 5, 5);
    const PixelGrid grid = PixelGrid::make(5, 5);
    Tensor depth = Tensor::hwc(5, 5, 1, 1.0);
    depth.at(3, 3, 0) = 0.0;
    CHECK_THROWS_AS(backproject(grid, depth, k), Error);
}

TEST_CASE("project: basics and mask") {
    const Intrinsics k = make_k(25, 25, 8, 6, 17, 13);
    Tensor pts = Tensor::hwc(1, 3, 3);
    pts.at(0, 0, 0) = 0; pts.at(0, 0, 1) = 0; pts.at(0, 0, 2) = 3.1;
    pts.at(0, 1, 0) = 2; pts.at(0, 1, 1) = 4; pts.at(0, 1, 2) = 2;
    pts.at(0, 2, 0) = 1; pts.at(0, 2, 1) = 1; pts.at(0, 2, 2) = 0;  // at the camera plane
    Tensor coords, mask;
    project(pts, k, coords, mask);
    CHECK(coords.at(0, 0, 0) == doctest::Approx(8));
    CHECK(coords.at(0, 0, 1) == doctest::Approx(6));
    CHECK(mask.at(0, 0, 0) == 1.0);
    CHECK(coords.at(0, 1, 0) == doctest::Approx(25.0 * 2 / 2 + 8));
    CHECK(mask.at(0, 2, 0) == 0.0);

    const Intrinsics unit = make_k(1, 1, 0, 0, 4, 4);
    Tensor one = Tensor::hwc(1, 1, 3);
    one.at(0, 0, 0) = 2; one.at(0, 0, 1) = 4; one.at(0, 0, 2) = 2;
    project(one, unit, coords, mask);
    CHECK(coords.at(0, 0, 0) == doctest::Approx(1));
    CHECK(coords.at(0, 0, 1) == doctest::Approx(2));
}

TEST_CASE("project(backproject) is the identity within 1e-6 px") {
    Rng rng(100);
    const Intrinsics k = make_k(21.5, 23.5, 7.2, 5.8, 16, 12);
    const PixelGrid grid = PixelGrid::make(k.width, k.height);
    Tensor depth = Tensor::hwc(k.height, k.width, 1);
    for (double& v : depth.data) v = rng.uniform(0.3, 9.0);
    const Tensor pts = backproject(grid, depth, k);
    Tensor coords, mask;
    project(pts, k, coords, mask);
    for (int y = 0; y < k.height; ++y)
        for (int x = 0; x < k.width; ++x) {
            CHECK(mask.at(y, x, 0) == 1.0);
            CHECK(std::fabs(coords.at(y, x, 0) - x) < 1e-6);
            CHECK(std::fabs(coords.at(y, x, 1) - y) < 1e-6);
        }
}

TEST_CASE("transform: identity, translation, rotation") {
    Tensor pts = Tensor::hwc(1, 1, 3);
    pts.at(0, 0, 0) = 0; pts.at(0, 0, 1) = 0; pts.at(0, 0, 2) = 1;

    Pose ident;
    const Tensor same = transform(ident, pts);
    CHECK(same.at(0, 0, 2) == 1.0);

    Pose trans;
    trans.translation = {0, 0, 1};
    const Tensor moved = transform(trans, pts);
    CHECK(moved.at(0, 0, 2) == doctest::Approx(2.0));

    Tensor ex = Tensor::hwc(1, 1, 3);
    ex.at(0, 0, 0) = 1;
    const Tensor rot = transform(rot_z_90(), ex);
    CHECK(std::fabs(rot.at(0, 0, 0) - 0.0) < 1e-6);
    CHECK(std::fabs(rot.at(0, 0, 1) - 1.0) < 1e-6);
    CHECK(std::fabs(rot.at(0, 0, 2) - 0.0) < 1e-6);
}

TEST_CASE("transform preserves pairwise distances and handedness") {
    Rng rng(101);
    Tensor pts = Tensor::hwc(1, 24, 3);
    for (double& v : pts.data) v = rng.uniform(-3, 3);
    Pose p;
    p.rotation = rodrigues({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    p.translation = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    p.validate();
    CHECK(mat3_det(p.rotation) == doctest::Approx(1.0).epsilon(1e-9));
    const Tensor moved = transform(p, pts);
    auto dist = [](const Tensor& t, int a, int b) {
        double s = 0;
        for (int ch = 0; ch < 3; ++ch) {
            const double d = t.at(0, a, ch) - t.at(0, b, ch);
            s += d * d;
        }
        return std::sqrt(s);
    };
    for (int i = 0; i < 24; ++i)
        for (int j = i + 1; j < 24; ++j)
            CHECK(std::fabs(dist(pts, i, j) - dist(moved, i, j)) < 1e-6);
}

TEST_CASE("pose validation rejects non-orthonormal rotations") {
    Pose p;
    p.rotation[0] = 1.1;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("pose compose and inverse agree with direct evaluation") {
    Rng rng(102);
    Pose a, b;
    a.rotation = rodrigues({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    a.translation = {0.3, -0.2, 0.5};
    b.rotation = rodrigues({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    b.translation = {-0.1, 0.4, 0.2};
    const Vec3 x{0.7, -1.2, 2.5};
    const Vec3 via_compose = a.compose(b).apply(x);
    const Vec3 direct = a.apply(b.apply(x));
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(via_compose[i] - direct[i]) < 1e-12);

    const Vec3 back = a.inverse().apply(a.apply(x));
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(back[i] - x[i]) < 1e-12);
}

TEST_CASE("reconstruct with identity pose returns the source exactly") {
    Rng rng(103);
    const Intrinsics k = make_k(20, 20, 7.5, 5.5, 16, 12);
    const Tensor img = sftest::smooth_image(12, 16, 3, rng);
    Tensor depth = Tensor::hwc(12, 16, 1);
    for (double& v : depth.data) v = rng.uniform(0.5, 8.0);
    Tensor out, validity;
    reconstruct(img, depth, k, Pose{}, out, validity);
    double max_diff = 0;
    for (std::size_t i = 0; i < img.size(); ++i)
        max_diff = std::max(max_diff, std::fabs(out[i] - img[i]));
    CHECK(max_diff <= 1e-12);
    CHECK(validity.sum() == doctest::Approx(12 * 16));
}

TEST_CASE("forward translation of a constant-depth plane scales about the principal point") {
    const Intrinsics k = make_k(24, 24, 7.5, 5.5, 16, 12);
    const double depth0 = 4.0, dz = 1.0;
    Tensor depth = Tensor::hwc(12, 16, 1, depth0);
    Pose fwd;
    fwd.translation = {0, 0, dz};  // source camera closer to the plane
    const PixelGrid grid = PixelGrid::make(16, 12);
    Tensor coords, mask;
    project(transform(fwd, backproject(grid, depth, k)), k, coords, mask);
    // Closed form: u' - cx = (u - cx) * depth0 / (depth0 + dz).
    const double scale = depth0 / (depth0 + dz);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(std::fabs(coords.at(y, x, 0) - (k.cx + (x - k.cx) * scale)) < 1e-9);
            CHECK(std::fabs(coords.at(y, x, 1) - (k.cy + (y - k.cy) * scale)) < 1e-9);
        }
}

TEST_CASE("rigid_transform_node: pose gradients match finite differences") {
    Rng rng(104);
    Tensor pts = Tensor::hwc(3, 4, 3);
    for (double& v : pts.data) v = rng.uniform(-2, 2);
    Tensor rv = Tensor::vec(3), tv = Tensor::vec(3), proj = pts;
    for (int i = 0; i < 3; ++i) {
        rv[i] = rng.uniform(-0.8, 0.8);
        tv[i] = rng.uniform(-1, 1);
    }
    for (double& v : proj.data) v = rng.uniform(-1, 1);

    NodePtr pl = make_leaf(pts, true);
    NodePtr rl = make_leaf(rv, true);
    NodePtr tl = make_leaf(tv, true);
    NodePtr loss = masked_sum(rigid_transform_node(pl, PoseNodes{rl, tl}), proj);
    Gradients g = backward(loss);

    auto eval = [&](const Tensor& r, const Tensor& t, const Tensor& p) {
        NodePtr n = rigid_transform_node(make_const(p), PoseNodes{make_const(r), make_const(t)});
        double s = 0;
        for (std::size_t i = 0; i < n->value.size(); ++i) s += n->value[i] * proj[i];
        return s;
    };
    for (int i = 0; i < 3; ++i) {
        Tensor rp = rv, rm = rv;
        rp[i] += 1e-6;
        rm[i] -= 1e-6;
        const double fd = (eval(rp, tv, pts) - eval(rm, tv, pts)) / 2e-6;
        CHECK(rel_err((*g.find(rl))[i], fd) < 1e-6);
        Tensor tp = tv, tm = tv;
        tp[i] += 1e-6;
        tm[i] -= 1e-6;
        const double fdt = (eval(rv, tp, pts) - eval(rv, tm, pts)) / 2e-6;
        CHECK(rel_err((*g.find(tl))[i], fdt) < 1e-6);
    }
    // Point gradients flow through R^T.
    const Tensor* gp = g.find(pl);
    REQUIRE(gp != nullptr);
    CHECK(gp->max_abs() > 0);

    // Zero rotation vector: derivative at the identity.
    Tensor rz = Tensor::vec(3);
    NodePtr rl0 = make_leaf(rz, true);
    Gradients g0 = backward(masked_sum(
        rigid_transform_node(make_leaf(pts, false), PoseNodes{rl0, make_leaf(tv, false)}), proj));
    for (int i = 0; i < 3; ++i) {
        Tensor rp = rz, rm = rz;
        rp[i] += 1e-6;
        rm[i] -= 1e-6;
        const double fd = (eval(rp, tv, pts) - eval(rm, tv, pts)) / 2e-6;
        CHECK(rel_err((*g0.find(rl0))[i], fd) < 1e-6);
    }
}

TEST_CASE("axis-angle round trip through rotation matrices") {
    Rng rng(106);
    for (int i = 0; i < 20; ++i) {
        const Vec3 w{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Mat3 r = rodrigues(w);
        const Vec3 back = rotation_to_axis_angle(r);
        const Mat3 r2 = rodrigues(back);
        for (int j = 0; j < 9; ++j) CHECK(std::fabs(r[j] - r2[j]) < 1e-9);
    }
}

TEST_CASE("Jacobian of reconstruct wrt depth matches central finite differences") {
    // Scalarize through a random projection over pixels that stay clear of
    // the bilinear lattice and the image border under the FD step.
    Rng rng(105);
    const int H = 16, W = 16;
    const Intrinsics k = make_k(18, 18, 7.5, 7.5, W, H);
    int checked_total = 0;
    for (int inst = 0; inst < 5; ++inst) {
        const Tensor src = sftest::smooth_image(H, W, 3, rng);
        const Tensor depth = sftest::smooth_depth(H, W, 2.0 + 0.4 * inst, rng);
        Pose pose;
        pose.rotation = rodrigues(
            {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)});
        pose.translation = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                            rng.uniform(-0.05, 0.05)};

        const PixelGrid grid = PixelGrid::make(W, H);
        Tensor coords, front;
        project(transform(pose, backproject(grid, depth, k)), k, coords, front);
        const double h_step = 1e-3 * 2.0;
        Tensor safe = Tensor::hwc(H, W, 1);
        int n_safe = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (front.at(y, x, 0) == 0.0) continue;
                const double u = coords.at(y, x, 0), v = coords.at(y, x, 1);
                if (u < 0.6 || u > W - 1.6 || v < 0.6 || v > H - 1.6) continue;
                const double fu = u - std::floor(u), fv = v - std::floor(v);
                if (fu < 0.05 || fu > 0.95 || fv < 0.05 || fv > 0.95) continue;
                safe.at(y, x, 0) = 1.0;
                ++n_safe;
            }
        REQUIRE(n_safe > 30);

        Tensor proj = Tensor::hwc(H, W, 3);
        for (double& v : proj.data) v = rng.uniform(-1, 1);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int ch = 0; ch < 3; ++ch) proj.at(y, x, ch) *= safe.at(y, x, 0);

        NodePtr dl = make_leaf(depth, true);
        const WarpResult wr = reconstruct_node(src, dl, k, pose_nodes_from(pose));
        Gradients g = backward(masked_sum(wr.image, proj));
        const Tensor* gd = g.find(dl);
        REQUIRE(gd != nullptr);

        auto eval = [&](const Tensor& d) {
            Tensor out, validity;
            reconstruct(src, d, k, pose, out, validity);
            double s = 0;
            for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * proj[i];
            return s;
        };
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (safe.at(y, x, 0) == 0.0) continue;
                const std::size_t i = depth.idx(y, x, 0);
                const double fd = sftest::central_diff(eval, depth, i, h_step);
                CHECK(rel_err((*gd)[i], fd) < 1e-4);
                ++checked_total;
            }
    }
    CHECK(checked_total > 400);
}
