#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sf/camera.hpp"
#include "sf/tensor.hpp"

namespace sf {

enum class Layout { Room, Corridor, OutdoorStrip };

Layout layout_from_string(const std::string& s);
std::string layout_to_string(Layout layout);

struct SceneConfig {
    std::uint64_t seed = 0;
    Layout layout = Layout::Room;
    int frames = 3;
    int width = 160;
    int height = 120;
    double d_min = 0.4;   // meters
    double d_max = 8.0;
    int min_objects = 6;
    int max_objects = 14;
    double max_step_m = 0.05;    // camera translation bound per frame
    double max_turn_deg = 2.0;   // camera rotation bound per frame
    double drift_m = 0.0;        // directed component of the walk (<= max_step_m)
    double fov_deg = 60.0;       // horizontal field of view
    // 0: light direction derives from `seed` (varies across scenes).
    // Nonzero: all scenes generated with this value share one light, like
    // sequences captured under the same sun.
    std::uint64_t light_seed = 0;

    void validate() const;
};

struct RenderedFrame {
    Tensor image;     // (h,w,3) in [0,1]
    Tensor depth_gt;  // (h,w,1), meters, fully dense
    Pose pose;        // world-to-camera
    Intrinsics intrinsics;
};
using FramePtr = std::shared_ptr<const RenderedFrame>;

// ---- rendering core (also usable directly for controlled scenes) ----

struct TextureStyle {
    Vec3 base{0.5, 0.5, 0.5};
    Vec3 alt{0.8, 0.8, 0.8};
    double checker_freq = 2.0;
    Vec3 phase{0, 0, 0};
    double noise_freq = 3.0;
    double noise_amp = 0.2;
    Vec3 grad_dir{0, 0, 0};
    std::uint64_t salt = 0;

    Vec3 albedo(const Vec3& p) const;
};

struct Aabb {
    Vec3 lo{0, 0, 0}, hi{0, 0, 0};
};

struct Primitive {
    enum Kind { Enclosure, Box, Sphere } kind = Box;
    Aabb box{};        // Enclosure (camera inside) and Box
    Vec3 center{0, 0, 0};  // Sphere
    double radius = 0;
    TextureStyle texture;
};

struct Scene {
    std::vector<Primitive> prims;
    Vec3 light{0, 1, 0};  // unit direction of travel
    double ambient = 0.4;
    double diffuse = 0.6;
};

// Ray-casts one frame; depth_gt is the z-depth (distance along the optical
// axis) of the nearest hit. Throws if any ray escapes the scene.
RenderedFrame render_frame(const Scene& scene, const Pose& pose, const Intrinsics& K);

struct FrameTriplet {
    FramePtr prev, center, next;
    Pose rel_prev;  // g_{(t-1)t}
    Pose rel_next;  // g_{(t+1)t}
};

// Ray-cast renderer over textured planes, boxes and spheres with Lambertian
// shading; deterministic given the seed. Every pixel is covered because the
// camera sits inside a closed, textured enclosure.
std::vector<FramePtr> generate_scene(const SceneConfig& config);

// Sliding window of three consecutive frames; rejects fewer than 3 frames.
std::vector<FrameTriplet> make_triplets(const std::vector<FramePtr>& frames);

// Occlusion estimate for warp checks: a pixel is flagged when the depth seen
// in the adjacent view disagrees with the transformed depth by more than
// rel_tol (forward-backward consistency).
Tensor occlusion_mask(const Tensor& depth_t, const Tensor& depth_tau, const Intrinsics& K,
                      const Pose& rel_pose, double rel_tol = 0.01);

}  // namespace sf
