#pragma once

#include "sf/camera.hpp"
#include "sf/nn_ops.hpp"

namespace sf {

// Pose as autodiff inputs: axis-angle rotation and translation. For
// ground-truth poses both leaves are constants; for learned poses they come
// from the pose regressor and receive gradients.
struct PoseNodes {
    NodePtr rotvec;  // (1,1,3)
    NodePtr trans;   // (1,1,3)
};

PoseNodes pose_nodes_from(const Pose& pose);
Vec3 rotation_to_axis_angle(const Mat3& r);

// depth (h,w,1) -> camera-frame points (h,w,3). Rejects non-positive depth.
NodePtr backproject_node(NodePtr depth, const Intrinsics& K);

// points (h,w,3) -> R(rotvec) * p + t, with gradients to all inputs.
NodePtr rigid_transform_node(NodePtr points, const PoseNodes& pose);

// points -> pixel coords (h,w,2) with front-of-camera mask (h,w,1).
struct ProjectResult {
    NodePtr coords;
    Tensor front_mask;
};
ProjectResult project_node(NodePtr points, const Intrinsics& K);

// Full differentiable reconstruction: sample `source` at the coordinates the
// depth map projects to in the source view. validity = front-of-camera AND
// in-bounds; losses consume the mask, never the zero fill values.
struct WarpResult {
    NodePtr image;   // (h,w,C)
    Tensor validity; // (h,w,1)
};
WarpResult reconstruct_node(const Tensor& source, NodePtr depth, const Intrinsics& K,
                            const PoseNodes& pose);

// Non-autodiff composition of backproject/transform/project/bilinear_sample.
void reconstruct(const Tensor& source, const Tensor& depth, const Intrinsics& K,
                 const Pose& pose, Tensor& out, Tensor& validity);

}  // namespace sf
