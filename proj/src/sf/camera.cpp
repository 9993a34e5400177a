#include "sf/camera.hpp"

#include <cmath>

#include "sf/common.hpp"

namespace sf {

void Intrinsics::validate() const {
    require(fx > 0 && fy > 0, "intrinsics: focal lengths must be positive");
    require(width > 0 && height > 0, "intrinsics: image size must be positive");
    require(cx >= 0 && cx < width, "intrinsics: cx out of image");
    require(cy >= 0 && cy < height, "intrinsics: cy out of image");
}

Vec3 mat3_apply(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += a[3 * i + k] * b[3 * k + j];
            r[3 * i + j] = s;
        }
    return r;
}

Mat3 mat3_transpose(const Mat3& m) {
    return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

Mat3 mat3_identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

double mat3_det(const Mat3& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 rodrigues(const Vec3& w) {
    const double theta = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    Mat3 K = {0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0};
    if (theta < 1e-12) {
        Mat3 r = mat3_identity();
        for (int i = 0; i < 9; ++i) r[i] += K[i];
        return r;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    Mat3 K2 = mat3_mul(K, K);
    Mat3 r = mat3_identity();
    for (int i = 0; i < 9; ++i) r[i] += a * K[i] + b * K2[i];
    return r;
}

void Pose::validate() const {
    const Mat3 rtr = mat3_mul(mat3_transpose(rotation), rotation);
    const Mat3 eye = mat3_identity();
    for (int i = 0; i < 9; ++i)
        require(std::fabs(rtr[i] - eye[i]) <= 1e-6, "pose: rotation is not orthonormal");
    require(std::fabs(mat3_det(rotation) - 1.0) <= 1e-6, "pose: rotation determinant is not +1");
}

Pose Pose::inverse() const {
    Pose p;
    p.rotation = mat3_transpose(rotation);
    const Vec3 t = mat3_apply(p.rotation, translation);
    p.translation = {-t[0], -t[1], -t[2]};
    return p;
}

Pose Pose::compose(const Pose& rhs) const {
    Pose p;
    p.rotation = mat3_mul(rotation, rhs.rotation);
    const Vec3 rt = mat3_apply(rotation, rhs.translation);
    p.translation = {rt[0] + translation[0], rt[1] + translation[1], rt[2] + translation[2]};
    return p;
}

Vec3 Pose::apply(const Vec3& p) const {
    const Vec3 r = mat3_apply(rotation, p);
    return {r[0] + translation[0], r[1] + translation[1], r[2] + translation[2]};
}

bool Pose::is_identity(double tol) const {
    const Mat3 eye = mat3_identity();
    for (int i = 0; i < 9; ++i)
        if (std::fabs(rotation[i] - eye[i]) > tol) return false;
    for (int i = 0; i < 3; ++i)
        if (std::fabs(translation[i]) > tol) return false;
    return true;
}

PixelGrid PixelGrid::make(int width, int height) {
    PixelGrid g;
    g.coords = Tensor::hwc(height, width, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            g.coords.at(y, x, 0) = x;
            g.coords.at(y, x, 1) = y;
            g.coords.at(y, x, 2) = 1.0;
        }
    return g;
}

Tensor backproject(const PixelGrid& grid, const Tensor& depth, const Intrinsics& K) {
    require(depth.c == 1, "backproject: depth must be single channel");
    require(grid.coords.h == depth.h && grid.coords.w == depth.w, "backproject: grid/depth size mismatch");
    Tensor pts = Tensor::hwc(depth.h, depth.w, 3);
    for (int y = 0; y < depth.h; ++y)
        for (int x = 0; x < depth.w; ++x) {
            const double d = depth.at(y, x, 0);
            require(d > 0.0, "backproject: non-positive depth");
            pts.at(y, x, 0) = (grid.coords.at(y, x, 0) - K.cx) / K.fx * d;
            pts.at(y, x, 1) = (grid.coords.at(y, x, 1) - K.cy) / K.fy * d;
            pts.at(y, x, 2) = d;
        }
    return pts;
}

Tensor transform(const Pose& pose, const Tensor& points) {
    require(points.c == 3, "transform: points must have 3 channels");
    Tensor out = Tensor::hwc(points.h, points.w, 3);
    for (int y = 0; y < points.h; ++y)
        for (int x = 0; x < points.w; ++x) {
            const Vec3 p{points.at(y, x, 0), points.at(y, x, 1), points.at(y, x, 2)};
            const Vec3 q = pose.apply(p);
            out.at(y, x, 0) = q[0];
            out.at(y, x, 1) = q[1];
            out.at(y, x, 2) = q[2];
        }
    return out;
}

void project(const Tensor& points, const Intrinsics& K, Tensor& coords, Tensor& mask) {
    require(points.c == 3, "project: points must have 3 channels");
    coords = Tensor::hwc(points.h, points.w, 2);
    mask = Tensor::hwc(points.h, points.w, 1);
    for (int y = 0; y < points.h; ++y)
        for (int x = 0; x < points.w; ++x) {
            const double z = points.at(y, x, 2);
            if (z <= kFrontEpsZ) continue;
            coords.at(y, x, 0) = K.fx * points.at(y, x, 0) / z + K.cx;
            coords.at(y, x, 1) = K.fy * points.at(y, x, 1) / z + K.cy;
            mask.at(y, x, 0) = 1.0;
        }
}

}  // namespace sf
