#pragma once

#include "sf/autodiff.hpp"

namespace sf {

// Convolution with odd kernel, zero same-padding. Output is
// ceil(h/stride) x ceil(w/stride). Weight shape (kh, kw, cin, cout),
// bias (1,1,cout) or null.
NodePtr conv2d(NodePtr x, NodePtr weight, NodePtr bias, int stride);

// Transposed convolution defined as the exact adjoint of the stride-2
// same-padded conv2d above; doubles the spatial resolution.
NodePtr conv2d_transpose2(NodePtr x, NodePtr weight, NodePtr bias);

// Stride-1 max pool with odd kernel; out-of-bounds positions contribute the
// padding value 0, so absent (zero) measurements never win against positives.
NodePtr maxpool_same(NodePtr x, int kernel);

// Stride-1 3x3 box filter normalized by the in-bounds neighbor count.
NodePtr avgpool3_same(NodePtr x);

// Nearest-neighbor 2x upsample.
NodePtr nn_upsample2(NodePtr x);

// Spatial mean -> (1,1,c).
NodePtr global_mean(NodePtr x);

// Bilinear sampling of `image` at `coords` (h,w,2; channel 0 = x, 1 = y).
// Outside samples return 0 with mask 0. Coordinates within `border_tol` of
// the valid rectangle are treated as inside (guards float noise at borders).
struct SampleResult {
    NodePtr values;  // (h,w,C)
    Tensor mask;     // (h,w,1) in {0,1}
};
SampleResult bilinear_sample_node(NodePtr image, NodePtr coords);

// Plain (non-autodiff) version.
void bilinear_sample(const Tensor& image, const Tensor& coords, Tensor& values, Tensor& mask);

inline constexpr double kBorderTol = 1e-9;

}  // namespace sf
