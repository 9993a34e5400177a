#include "sf/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "sf/common.hpp"
#include "sf/nn_ops.hpp"
#include "sf/rng.hpp"
#include "sf/warp.hpp"

namespace sf {

Layout layout_from_string(const std::string& s) {
    if (s == "room") return Layout::Room;
    if (s == "corridor") return Layout::Corridor;
    if (s == "outdoor-strip") return Layout::OutdoorStrip;
    throw Error("unknown layout '" + s + "' (expected room, corridor or outdoor-strip)");
}

std::string layout_to_string(Layout layout) {
    switch (layout) {
        case Layout::Room: return "room";
        case Layout::Corridor: return "corridor";
        default: return "outdoor-strip";
    }
}

void SceneConfig::validate() const {
    require(0 < d_min && d_min < d_max, "scene config: need 0 < d_min < d_max");
    require(frames >= 3, "scene config: trajectory must have at least 3 frames");
    require(width > 0 && height > 0, "scene config: bad resolution");
    require(min_objects >= 0 && max_objects >= min_objects, "scene config: bad object count range");
    require(drift_m >= 0.0 && drift_m <= max_step_m, "scene config: drift must stay within the step bound");
}

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise, C1-smooth; keeps images well behaved under the
// subpixel resampling that view-synthesis checks perform.
double value_noise_impl(const Vec3& p, std::uint64_t salt) {
    const double fx = std::floor(p[0]), fy = std::floor(p[1]), fz = std::floor(p[2]);
    const int ix = static_cast<int>(fx), iy = static_cast<int>(fy), iz = static_cast<int>(fz);
    const double tx = smoothstep(p[0] - fx), ty = smoothstep(p[1] - fy), tz = smoothstep(p[2] - fz);
    auto lattice = [salt](int x, int y, int z) {
        std::uint64_t s = salt ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) |
                                  (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 20) |
                                  (static_cast<std::uint64_t>(static_cast<std::uint32_t>(z)) << 40));
        return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    };
    double acc = 0.0;
    for (int dz = 0; dz <= 1; ++dz)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                acc += w * lattice(ix + dx, iy + dy, iz + dz);
            }
    return acc;
}

TextureStyle random_texture(Rng& rng) {
    TextureStyle t;
    for (int i = 0; i < 3; ++i) {
        t.base[i] = rng.uniform(0.15, 0.85);
        t.alt[i] = rng.uniform(0.15, 0.85);
        t.phase[i] = rng.uniform(0.0, 6.28318530717958647692);
        t.grad_dir[i] = rng.uniform(-0.06, 0.06);
    }
    t.checker_freq = rng.uniform(1.2, 3.5);
    t.noise_freq = rng.uniform(1.5, 4.0);
    t.noise_amp = rng.uniform(0.1, 0.3);
    t.salt = rng.next_u64();
    return t;
}

// Ray x(t) = o + t*d with unnormalized d (z-component 1 in camera frame),
// so the hit parameter t equals the z-depth directly.
bool hit_sphere(const Primitive& s, const Vec3& o, const Vec3& d, double& t, Vec3& n) {
    const Vec3 oc{o[0] - s.center[0], o[1] - s.center[1], o[2] - s.center[2]};
    const double a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    const double b = 2.0 * (oc[0] * d[0] + oc[1] * d[1] + oc[2] * d[2]);
    const double c = oc[0] * oc[0] + oc[1] * oc[1] + oc[2] * oc[2] - s.radius * s.radius;
    const double disc = b * b - 4 * a * c;
    if (disc < 0) return false;
    const double sq = std::sqrt(disc);
    double t0 = (-b - sq) / (2 * a);
    if (t0 <= 1e-6) t0 = (-b + sq) / (2 * a);
    if (t0 <= 1e-6) return false;
    t = t0;
    for (int i = 0; i < 3; ++i) n[i] = (o[i] + t * d[i] - s.center[i]) / s.radius;
    return true;
}

bool hit_box(const Primitive& bx, const Vec3& o, const Vec3& d, bool inside, double& t, Vec3& n) {
    double tmin = -1e300, tmax = 1e300;
    int axis_min = -1, axis_max = -1;
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(d[i]) < 1e-12) {
            if (o[i] < bx.box.lo[i] || o[i] > bx.box.hi[i]) return false;
            continue;
        }
        double t0 = (bx.box.lo[i] - o[i]) / d[i];
        double t1 = (bx.box.hi[i] - o[i]) / d[i];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > tmin) { tmin = t0; axis_min = i; }
        if (t1 < tmax) { tmax = t1; axis_max = i; }
    }
    if (tmin > tmax) return false;
    if (inside) {
        if (tmax <= 1e-6) return false;
        t = tmax;
        const int i = axis_max;
        const double mid = 0.5 * (bx.box.lo[i] + bx.box.hi[i]);
        n = {0, 0, 0};
        n[i] = (o[i] + t * d[i]) > mid ? -1.0 : 1.0;  // inward normal
        return true;
    }
    if (tmin <= 1e-6) return false;
    t = tmin;
    const int i = axis_min;
    n = {0, 0, 0};
    n[i] = d[i] > 0 ? -1.0 : 1.0;
    return true;
}

struct LayoutSpec {
    Aabb enclosure;
    Aabb camera_zone;
};

LayoutSpec layout_spec(Layout layout, double d_max) {
    LayoutSpec s;
    auto sym = [](double a, double b, double c) {
        return Aabb{{-a, -b, -c}, {a, b, c}};
    };
    switch (layout) {
        case Layout::Room: {
            const double a = 0.33 * d_max, b = std::min(1.5, 0.2 * d_max);
            s.enclosure = sym(a, b, a);
            s.camera_zone = sym(0.3 * a, 0.3 * b, 0.3 * a);
            break;
        }
        case Layout::Corridor: {
            const double a = 0.18 * d_max, b = 0.16 * d_max, L = 0.45 * d_max;
            s.enclosure = sym(a, b, L);
            s.camera_zone = sym(0.3 * a, 0.3 * b, 0.75 * L);
            break;
        }
        default: {  // outdoor strip: wide and shallow, ground low
            const double a = 0.4 * d_max, b = 0.22 * d_max;
            s.enclosure = sym(a, b, a);
            s.camera_zone = sym(0.35 * a, 0.25 * b, 0.35 * a);
            break;
        }
    }
    return s;
}

double dist_to_segmented_path(const std::vector<Vec3>& path, const Vec3& p) {
    double best = 1e300;
    for (const Vec3& q : path) {
        const double d = std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) +
                                   (p[2] - q[2]) * (p[2] - q[2]));
        best = std::min(best, d);
    }
    return best;
}

Mat3 yaw_pitch_roll(double yaw, double pitch, double roll) {
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cr = std::cos(roll), sr = std::sin(roll);
    const Mat3 Ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
    const Mat3 Rx{1, 0, 0, 0, cp, -sp, 0, sp, cp};
    const Mat3 Rz{cr, -sr, 0, sr, cr, 0, 0, 0, 1};
    return mat3_mul(Ry, mat3_mul(Rx, Rz));
}

}  // namespace

Vec3 TextureStyle::albedo(const Vec3& p) const {
    // Smooth quasi-checker: a sine product instead of hard tiles keeps the
    // image well behaved under subpixel resampling.
    const double s = 0.5 + 0.5 * std::sin(checker_freq * p[0] + phase[0]) *
                               std::sin(checker_freq * p[2] + phase[1]) *
                               std::sin(0.7 * checker_freq * p[1] + phase[2]);
    const double n = noise_amp *
                     (2.0 * value_noise_impl(
                                {p[0] * noise_freq, p[1] * noise_freq, p[2] * noise_freq}, salt) -
                      1.0);
    // A faint fine-grained octave; it feeds corner detection without adding
    // meaningful resampling error.
    const double n2 = 0.25 * noise_amp *
                      (2.0 * value_noise_impl({p[0] * noise_freq * 4.0, p[1] * noise_freq * 4.0,
                                               p[2] * noise_freq * 4.0},
                                              salt ^ 0x9e3779b97f4a7c15ULL) -
                       1.0);
    const double g = grad_dir[0] * p[0] + grad_dir[1] * p[1] + grad_dir[2] * p[2];
    Vec3 c;
    for (int i = 0; i < 3; ++i) {
        const double v = base[i] + (alt[i] - base[i]) * s + n + n2 + g;
        c[i] = std::min(0.98, std::max(0.05, v));
    }
    return c;
}

RenderedFrame render_frame(const Scene& scene, const Pose& pose, const Intrinsics& K) {
    RenderedFrame f;
    f.pose = pose;
    f.intrinsics = K;
    f.image = Tensor::hwc(K.height, K.width, 3);
    f.depth_gt = Tensor::hwc(K.height, K.width, 1);

    const Mat3 r_cw = mat3_transpose(pose.rotation);
    const Vec3 t_neg = mat3_apply(r_cw, pose.translation);
    const Vec3 origin{-t_neg[0], -t_neg[1], -t_neg[2]};

    for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
            const Vec3 dir_cam{(x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0};
            const Vec3 dir = mat3_apply(r_cw, dir_cam);
            double best_t = 1e300;
            Vec3 best_n{0, 0, 0};
            const Primitive* best_p = nullptr;
            for (const Primitive& prim : scene.prims) {
                double t;
                Vec3 n;
                bool ok = false;
                switch (prim.kind) {
                    case Primitive::Enclosure: ok = hit_box(prim, origin, dir, true, t, n); break;
                    case Primitive::Box: ok = hit_box(prim, origin, dir, false, t, n); break;
                    case Primitive::Sphere: ok = hit_sphere(prim, origin, dir, t, n); break;
                }
                if (ok && t < best_t) {
                    best_t = t;
                    best_n = n;
                    best_p = &prim;
                }
            }
            require(best_p != nullptr, "scenegen: ray escaped the enclosure");
            const Vec3 p{origin[0] + best_t * dir[0], origin[1] + best_t * dir[1],
                         origin[2] + best_t * dir[2]};
            // Two-sided Lambertian shading with a fixed directional light.
            Vec3 n = best_n;
            const double nd = n[0] * dir[0] + n[1] * dir[1] + n[2] * dir[2];
            if (nd > 0) for (double& v : n) v = -v;
            const double lambert =
                std::max(0.0, -(n[0] * scene.light[0] + n[1] * scene.light[1] + n[2] * scene.light[2]));
            const double shade = scene.ambient + scene.diffuse * lambert;
            const Vec3 albedo = best_p->texture.albedo(p);
            for (int ch = 0; ch < 3; ++ch)
                f.image.at(y, x, ch) = std::min(1.0, std::max(0.0, albedo[ch] * shade));
            f.depth_gt.at(y, x, 0) = best_t;  // z-depth by construction
        }
    }
    return f;
}

std::vector<FramePtr> generate_scene(const SceneConfig& config) {
    config.validate();
    const LayoutSpec spec = layout_spec(config.layout, config.d_max);

    Intrinsics K;
    K.width = config.width;
    K.height = config.height;
    K.fx = 0.5 * config.width / std::tan(0.5 * config.fov_deg * 3.14159265358979323846 / 180.0);
    K.fy = K.fx;
    K.cx = 0.5 * (config.width - 1);
    K.cy = 0.5 * (config.height - 1);
    K.validate();

    // Trajectory: bounded random walk in position and orientation.
    Rng traj_rng(derive_seed(config.seed, "trajectory"));
    std::vector<Vec3> positions(config.frames);
    std::vector<Pose> poses(config.frames);
    Vec3 pos{0.5 * (spec.camera_zone.lo[0] + spec.camera_zone.hi[0]),
             0.5 * (spec.camera_zone.lo[1] + spec.camera_zone.hi[1]),
             0.5 * (spec.camera_zone.lo[2] + spec.camera_zone.hi[2])};
    for (int i = 0; i < 3; ++i)
        pos[i] += traj_rng.uniform(-0.2, 0.2) * (spec.camera_zone.hi[i] - spec.camera_zone.lo[i]);
    double yaw = traj_rng.uniform(-0.5, 0.5);
    double pitch = traj_rng.uniform(-0.1, 0.1);
    double roll = 0.0;
    const double turn = config.max_turn_deg * 3.14159265358979323846 / 180.0;
    // Optional directed component: a bounded walk with a persistent heading
    // keeps inter-frame baselines near the step bound (reflects at the zone
    // limits). The per-frame translation never exceeds max_step_m.
    Vec3 drift_dir{traj_rng.uniform(-1, 1), 0.3 * traj_rng.uniform(-1, 1), traj_rng.uniform(-1, 1)};
    {
        const double n = std::sqrt(drift_dir[0] * drift_dir[0] + drift_dir[1] * drift_dir[1] +
                                   drift_dir[2] * drift_dir[2]);
        for (double& v : drift_dir) v /= std::max(1e-9, n);
    }
    const double jitter = std::max(0.0, (config.max_step_m - config.drift_m) / 1.7320508);
    for (int fidx = 0; fidx < config.frames; ++fidx) {
        positions[fidx] = pos;
        const Mat3 r_cw = yaw_pitch_roll(yaw, pitch, roll);
        Pose pose;
        pose.rotation = mat3_transpose(r_cw);
        const Vec3 rp = mat3_apply(pose.rotation, pos);
        pose.translation = {-rp[0], -rp[1], -rp[2]};
        poses[fidx] = pose;

        for (int i = 0; i < 3; ++i) {
            const double step = config.drift_m * drift_dir[i] + traj_rng.uniform(-jitter, jitter);
            double next = pos[i] + step;
            if (next < spec.camera_zone.lo[i] || next > spec.camera_zone.hi[i]) {
                drift_dir[i] = -drift_dir[i];  // bounce off the zone wall
                next = pos[i] - step;
            }
            pos[i] = std::min(spec.camera_zone.hi[i], std::max(spec.camera_zone.lo[i], next));
        }
        yaw += traj_rng.uniform(-turn, turn);
        pitch = std::min(0.25, std::max(-0.25, pitch + traj_rng.uniform(-turn, turn)));
        roll = std::min(0.1, std::max(-0.1, roll + traj_rng.uniform(-0.5 * turn, 0.5 * turn)));
    }

    // Scene content. Objects keep a clearance from the whole trajectory so
    // every rendered depth stays within [d_min, d_max].
    Scene scene;
    Rng obj_rng(derive_seed(config.seed, "objects"));
    Primitive enc;
    enc.kind = Primitive::Enclosure;
    enc.box = spec.enclosure;
    enc.texture = random_texture(obj_rng);
    scene.prims.push_back(enc);

    const int target = config.min_objects +
                       static_cast<int>(obj_rng.below(config.max_objects - config.min_objects + 1));
    const double clearance = config.d_min + 0.05;
    int placed = 0, attempts = 0;
    while (placed < target && attempts < 200 * (target + 1)) {
        ++attempts;
        const bool sphere = obj_rng.uniform() < 0.45;
        Vec3 c;
        for (int i = 0; i < 3; ++i)
            c[i] = obj_rng.uniform(spec.enclosure.lo[i] + 0.15, spec.enclosure.hi[i] - 0.15);
        const double size = obj_rng.uniform(0.1, 0.35) * std::max(1.0, 0.12 * config.d_max);
        if (dist_to_segmented_path(positions, c) < clearance + size * 1.8) continue;
        Primitive p;
        p.texture = random_texture(obj_rng);
        if (sphere) {
            p.kind = Primitive::Sphere;
            p.center = c;
            p.radius = size;
        } else {
            p.kind = Primitive::Box;
            Vec3 half;
            for (int i = 0; i < 3; ++i) half[i] = size * obj_rng.uniform(0.5, 1.4);
            p.box = {{c[0] - half[0], c[1] - half[1], c[2] - half[2]},
                     {c[0] + half[0], c[1] + half[1], c[2] + half[2]}};
        }
        scene.prims.push_back(p);
        ++placed;
    }

    Rng light_rng(derive_seed(config.light_seed ? config.light_seed : config.seed, "light"));
    Vec3 l{light_rng.uniform(-0.5, 0.5), light_rng.uniform(0.6, 1.0), light_rng.uniform(-0.5, 0.5)};
    const double ln = std::sqrt(l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
    scene.light = {l[0] / ln, l[1] / ln, l[2] / ln};

    // Frames are independent; render on two workers.
    std::vector<FramePtr> frames(config.frames);
    const int n_workers = 2;
    std::vector<std::future<void>> tasks;
    for (int wkr = 0; wkr < n_workers; ++wkr) {
        tasks.push_back(std::async(std::launch::async, [&, wkr] {
            for (int i = wkr; i < config.frames; i += n_workers)
                frames[i] = std::make_shared<RenderedFrame>(render_frame(scene, poses[i], K));
        }));
    }
    for (auto& t : tasks) t.get();
    return frames;
}

std::vector<FrameTriplet> make_triplets(const std::vector<FramePtr>& frames) {
    require(frames.size() >= 3, "make_triplets: need at least 3 frames");
    std::vector<FrameTriplet> out;
    for (std::size_t i = 1; i + 1 < frames.size(); ++i) {
        FrameTriplet t;
        t.prev = frames[i - 1];
        t.center = frames[i];
        t.next = frames[i + 1];
        t.rel_prev = t.prev->pose.compose(t.center->pose.inverse());
        t.rel_next = t.next->pose.compose(t.center->pose.inverse());
        out.push_back(std::move(t));
    }
    return out;
}

Tensor occlusion_mask(const Tensor& depth_t, const Tensor& depth_tau, const Intrinsics& K,
                      const Pose& rel_pose, double rel_tol) {
    const PixelGrid grid = PixelGrid::make(depth_t.w, depth_t.h);
    const Tensor pts = transform(rel_pose, backproject(grid, depth_t, K));
    Tensor coords, front;
    project(pts, K, coords, front);
    Tensor sampled, in_bounds;
    bilinear_sample(depth_tau, coords, sampled, in_bounds);
    Tensor occ = Tensor::hwc(depth_t.h, depth_t.w, 1);
    for (int y = 0; y < depth_t.h; ++y)
        for (int x = 0; x < depth_t.w; ++x) {
            if (front.at(y, x, 0) == 0.0 || in_bounds.at(y, x, 0) == 0.0) {
                occ.at(y, x, 0) = 1.0;  // not verifiable; treat as occluded
                continue;
            }
            const double expect = pts.at(y, x, 2);
            if (std::fabs(sampled.at(y, x, 0) - expect) > rel_tol * expect) occ.at(y, x, 0) = 1.0;
        }
    return occ;
}

}  // namespace sf
