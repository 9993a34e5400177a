#pragma once

#include <array>

#include "sf/tensor.hpp"

namespace sf {

// Pinhole intrinsics; pixel centers sit at integer coordinates.
struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;
};

using Mat3 = std::array<double, 9>;  // row-major
using Vec3 = std::array<double, 3>;

Vec3 mat3_apply(const Mat3& m, const Vec3& v);
Mat3 mat3_mul(const Mat3& a, const Mat3& b);
Mat3 mat3_transpose(const Mat3& m);
Mat3 mat3_identity();
double mat3_det(const Mat3& m);

// Rodrigues rotation from an axis-angle vector.
Mat3 rodrigues(const Vec3& axis_angle);

// Rigid transform x -> R x + t. Used both as world-to-camera extrinsics and
// as relative motion between cameras.
struct Pose {
    Mat3 rotation = mat3_identity();
    Vec3 translation{0, 0, 0};

    void validate() const;  // orthonormality and det +1 within 1e-6
    Pose inverse() const;
    Pose compose(const Pose& rhs) const;  // (*this) after rhs: x -> this(rhs(x))
    Vec3 apply(const Vec3& p) const;
    bool is_identity(double tol = 0.0) const;
};

// Homogeneous pixel coordinates [x, y, 1] for every pixel.
struct PixelGrid {
    Tensor coords;  // (h,w,3)
    static PixelGrid make(int width, int height);
};

inline constexpr double kFrontEpsZ = 1e-3;  // front-of-camera cutoff in meters

// p(x) = K^-1 [x,y,1]^T * depth(x). Rejects non-positive depth.
Tensor backproject(const PixelGrid& grid, const Tensor& depth, const Intrinsics& K);

// Rigid motion of a (h,w,3) point map.
Tensor transform(const Pose& pose, const Tensor& points);

// Perspective projection. coords (h,w,2); mask (h,w,1) false where z <= eps.
void project(const Tensor& points, const Intrinsics& K, Tensor& coords, Tensor& mask);

}  // namespace sf
