#include "sf/warp.hpp"

#include <cmath>

#include "sf/common.hpp"

namespace sf {

PoseNodes pose_nodes_from(const Pose& pose) {
    PoseNodes pn;
    const Vec3 aa = rotation_to_axis_angle(pose.rotation);
    Tensor r = Tensor::vec(3);
    Tensor t = Tensor::vec(3);
    for (int i = 0; i < 3; ++i) {
        r[i] = aa[i];
        t[i] = pose.translation[i];
    }
    pn.rotvec = make_const(std::move(r));
    pn.trans = make_const(std::move(t));
    return pn;
}

Vec3 rotation_to_axis_angle(const Mat3& r) {
    const double tr = r[0] + r[4] + r[8];
    double cos_t = (tr - 1.0) * 0.5;
    cos_t = std::min(1.0, std::max(-1.0, cos_t));
    const double theta = std::acos(cos_t);
    if (theta < 1e-12) return {0, 0, 0};
    Vec3 axis{r[7] - r[5], r[2] - r[6], r[3] - r[1]};
    const double s = 2.0 * std::sin(theta);
    if (std::fabs(s) < 1e-9) {
        // theta near pi: fall back to the diagonal form.
        Vec3 v{std::sqrt(std::max(0.0, (r[0] + 1) / 2)), std::sqrt(std::max(0.0, (r[4] + 1) / 2)),
               std::sqrt(std::max(0.0, (r[8] + 1) / 2))};
        // Fix signs from off-diagonals.
        if (r[1] + r[3] < 0) v[1] = -v[1];
        if (r[2] + r[6] < 0) v[2] = -v[2];
        return {v[0] * theta, v[1] * theta, v[2] * theta};
    }
    return {axis[0] / s * theta, axis[1] / s * theta, axis[2] / s * theta};
}

NodePtr backproject_node(NodePtr depth, const Intrinsics& K) {
    const Tensor& d = depth->value;
    require(d.c == 1, "backproject: depth must be single channel");
    auto gx = std::make_shared<Tensor>(Tensor::hwc(d.h, d.w, 1));
    auto gy = std::make_shared<Tensor>(Tensor::hwc(d.h, d.w, 1));
    Tensor pts = Tensor::hwc(d.h, d.w, 3);
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x) {
            const double dv = d.at(y, x, 0);
            require(dv > 0.0, "backproject: non-positive depth");
            const double rx = (x - K.cx) / K.fx;
            const double ry = (y - K.cy) / K.fy;
            gx->at(y, x, 0) = rx;
            gy->at(y, x, 0) = ry;
            pts.at(y, x, 0) = rx * dv;
            pts.at(y, x, 1) = ry * dv;
            pts.at(y, x, 2) = dv;
        }
    auto n = std::make_shared<Node>();
    n->value = std::move(pts);
    n->inputs = {std::move(depth)};
    n->requires_grad = n->inputs[0]->requires_grad;
    if (n->requires_grad) {
        n->backward = [gx, gy](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            for (int y = 0; y < go.h; ++y)
                for (int x = 0; x < go.w; ++x)
                    gi[0]->at(y, x, 0) += go.at(y, x, 0) * gx->at(y, x, 0) +
                                          go.at(y, x, 1) * gy->at(y, x, 0) + go.at(y, x, 2);
        };
    }
    return n;
}

namespace {

// d(exp([w]x))/dw_i following Gallego & Yezzi; at w = 0 the derivative is the
// elementary skew generator.
std::array<Mat3, 3> rodrigues_jacobian(const Vec3& w, const Mat3& R) {
    std::array<Mat3, 3> J;
    const double n2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    if (n2 < 1e-18) {
        J[0] = {0, 0, 0, 0, 0, -1, 0, 1, 0};
        J[1] = {0, 0, 1, 0, 0, 0, -1, 0, 0};
        J[2] = {0, -1, 0, 1, 0, 0, 0, 0, 0};
        return J;
    }
    const Mat3 eye = mat3_identity();
    Mat3 i_minus_r{};
    for (int k = 0; k < 9; ++k) i_minus_r[k] = eye[k] - R[k];
    for (int i = 0; i < 3; ++i) {
        const Vec3 e{i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0, i == 2 ? 1.0 : 0.0};
        const Vec3 v = mat3_apply(i_minus_r, e);
        const Vec3 cr{w[1] * v[2] - w[2] * v[1], w[2] * v[0] - w[0] * v[2], w[0] * v[1] - w[1] * v[0]};
        Mat3 m = {0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0};
        for (double& a : m) a *= w[i];
        const Mat3 crx = {0, -cr[2], cr[1], cr[2], 0, -cr[0], -cr[1], cr[0], 0};
        Mat3 s{};
        for (int k = 0; k < 9; ++k) s[k] = (m[k] + crx[k]) / n2;
        J[i] = mat3_mul(s, R);
    }
    return J;
}

}  // namespace

NodePtr rigid_transform_node(NodePtr points, const PoseNodes& pose) {
    const Tensor& p = points->value;
    require(p.c == 3, "rigid_transform: points must have 3 channels");
    const Vec3 w{pose.rotvec->value[0], pose.rotvec->value[1], pose.rotvec->value[2]};
    const Vec3 t{pose.trans->value[0], pose.trans->value[1], pose.trans->value[2]};
    const Mat3 R = rodrigues(w);

    Tensor out = Tensor::hwc(p.h, p.w, 3);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) {
            const Vec3 q = mat3_apply(R, {p.at(y, x, 0), p.at(y, x, 1), p.at(y, x, 2)});
            out.at(y, x, 0) = q[0] + t[0];
            out.at(y, x, 1) = q[1] + t[1];
            out.at(y, x, 2) = q[2] + t[2];
        }

    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->inputs = {points, pose.rotvec, pose.trans};
    n->requires_grad =
        points->requires_grad || pose.rotvec->requires_grad || pose.trans->requires_grad;
    if (n->requires_grad) {
        n->backward = [R, w](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
            const Tensor& pv = self.inputs[0]->value;
            if (gi[0]) {
                const Mat3 Rt = mat3_transpose(R);
                for (int y = 0; y < go.h; ++y)
                    for (int x = 0; x < go.w; ++x) {
                        const Vec3 g{go.at(y, x, 0), go.at(y, x, 1), go.at(y, x, 2)};
                        const Vec3 gp = mat3_apply(Rt, g);
                        gi[0]->at(y, x, 0) += gp[0];
                        gi[0]->at(y, x, 1) += gp[1];
                        gi[0]->at(y, x, 2) += gp[2];
                    }
            }
            if (gi[1]) {
                const auto J = rodrigues_jacobian(w, R);
                for (int i = 0; i < 3; ++i) {
                    double acc = 0.0;
                    for (int y = 0; y < go.h; ++y)
                        for (int x = 0; x < go.w; ++x) {
                            const Vec3 dq = mat3_apply(
                                J[i], {pv.at(y, x, 0), pv.at(y, x, 1), pv.at(y, x, 2)});
                            acc += go.at(y, x, 0) * dq[0] + go.at(y, x, 1) * dq[1] +
                                   go.at(y, x, 2) * dq[2];
                        }
                    (*gi[1])[i] += acc;
                }
            }
            if (gi[2]) {
                for (int i = 0; i < 3; ++i) {
                    double acc = 0.0;
                    for (int y = 0; y < go.h; ++y)
                        for (int x = 0; x < go.w; ++x) acc += go.at(y, x, i);
                    (*gi[2])[i] += acc;
                }
            }
        };
    }
    return n;
}

ProjectResult project_node(NodePtr points, const Intrinsics& K) {
    const Tensor& p = points->value;
    require(p.c == 3, "project: points must have 3 channels");
    Tensor coords = Tensor::hwc(p.h, p.w, 2);
    Tensor mask = Tensor::hwc(p.h, p.w, 1);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) {
            const double z = p.at(y, x, 2);
            if (z <= kFrontEpsZ) continue;
            coords.at(y, x, 0) = K.fx * p.at(y, x, 0) / z + K.cx;
            coords.at(y, x, 1) = K.fy * p.at(y, x, 1) / z + K.cy;
            mask.at(y, x, 0) = 1.0;
        }
    auto mask_copy = std::make_shared<Tensor>(mask);

    auto n = std::make_shared<Node>();
    n->value = std::move(coords);
    n->inputs = {std::move(points)};
    n->requires_grad = n->inputs[0]->requires_grad;
    if (n->requires_grad) {
        const double fx = K.fx, fy = K.fy;
        n->backward = [mask_copy, fx, fy](const Node& self, const Tensor& go,
                                          const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            const Tensor& pv = self.inputs[0]->value;
            for (int y = 0; y < go.h; ++y)
                for (int x = 0; x < go.w; ++x) {
                    if (mask_copy->at(y, x, 0) == 0.0) continue;
                    const double X = pv.at(y, x, 0), Y = pv.at(y, x, 1), Z = pv.at(y, x, 2);
                    const double gu = go.at(y, x, 0), gv = go.at(y, x, 1);
                    gi[0]->at(y, x, 0) += gu * fx / Z;
                    gi[0]->at(y, x, 1) += gv * fy / Z;
                    gi[0]->at(y, x, 2) += -(gu * fx * X + gv * fy * Y) / (Z * Z);
                }
        };
    }
    return {n, std::move(mask)};
}

WarpResult reconstruct_node(const Tensor& source, NodePtr depth, const Intrinsics& K,
                            const PoseNodes& pose) {
    NodePtr pts = backproject_node(std::move(depth), K);
    NodePtr moved = rigid_transform_node(std::move(pts), pose);
    ProjectResult proj = project_node(std::move(moved), K);
    SampleResult s = bilinear_sample_node(make_const(source), proj.coords);
    Tensor validity = proj.front_mask;
    for (std::size_t i = 0; i < validity.size(); ++i)
        validity[i] = validity[i] != 0.0 && s.mask[i] != 0.0 ? 1.0 : 0.0;
    return {s.values, std::move(validity)};
}

void reconstruct(const Tensor& source, const Tensor& depth, const Intrinsics& K,
                 const Pose& pose, Tensor& out, Tensor& validity) {
    const PixelGrid grid = PixelGrid::make(depth.w, depth.h);
    const Tensor pts = transform(pose, backproject(grid, depth, K));
    Tensor coords, front;
    project(pts, K, coords, front);
    Tensor sample_mask;
    bilinear_sample(source, coords, out, sample_mask);
    validity = front;
    for (std::size_t i = 0; i < validity.size(); ++i)
        validity[i] = front[i] != 0.0 && sample_mask[i] != 0.0 ? 1.0 : 0.0;
}

}  // namespace sf
