#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sf/camera.hpp"
#include "sf/sampling.hpp"
#include "sf/spp.hpp"
#include "sf/warp.hpp"

namespace sf {

// Ordered, named trainable leaves. Order is fixed by registration so
// optimizer state, serialization and hashing are all deterministic.
class ParamStore {
public:
    NodePtr add(const std::string& name, Tensor init);
    NodePtr find(const std::string& name) const;
    const std::vector<std::pair<std::string, NodePtr>>& items() const { return items_; }
    std::size_t param_count() const;
    std::uint64_t content_hash() const;

private:
    std::vector<std::pair<std::string, NodePtr>> items_;
};

std::size_t conv_param_count(int k, int cin, int cout, bool bias);

// (h,w,2) input: sparse depth values and the binary validity mask.
Tensor sparse_input_tensor(const SparseDepthMap& sparse);

// ---------------------------------------------------------------- ScaffNet
struct ScaffNetConfig {
    SppConfig spp;
    bool use_spp = true;
    std::vector<int> encoder{32, 64, 96, 128, 196};
    std::vector<int> decoder{128, 96, 64, 64, 32};  // last entry: pre-head channels
    int first_kernel = 5;
    double leaky_slope = 0.1;
    double d_floor = 1e-3;      // positive floor under the softplus output
    double head_bias = 1.8546;  // softplus(head_bias) ~ 2 m at init

    static ScaffNetConfig paper_preset();           // corner-style kernels (5,7,9,11,13)
    static ScaffNetConfig paper_preset_scanline();  // kernels (5,7,9,11)
    static ScaffNetConfig tiny_preset();            // quarter channels for fast runs

    int downsample_factor() const { return 1 << static_cast<int>(encoder.size()); }
    void validate() const;
};

// Topology estimator: sparse depth in, dense positive depth out.
class ScaffNet {
public:
    explicit ScaffNet(ScaffNetConfig config, std::uint64_t seed = 1);

    NodePtr forward(NodePtr sparse_input) const;
    Tensor infer(const Tensor& sparse_input) const;

    const ScaffNetConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

private:
    ScaffNetConfig config_;
    ParamStore params_;
    SppWeights spp_weights_;
};

// --------------------------------------------------------------- FusionNet
enum class FusionHead { AlphaBeta, Direct };

struct FusionNetConfig {
    std::vector<int> image_channels{48, 96, 192, 384, 384};
    std::vector<int> depth_channels{16, 32, 64, 128, 128};
    std::vector<int> decoder_deconv{256, 128, 128, 64};
    std::vector<int> decoder_conv{256, 128, 64};  // post-concat convs before the head
    int first_kernel = 5;
    double leaky_slope = 0.1;
    FusionHead head = FusionHead::AlphaBeta;
    double d_min = 0.2;
    double d_max = 10.0;
    double head_bias = 1.8546;  // direct head only

    static FusionNetConfig paper_preset();
    static FusionNetConfig tiny_preset();

    int downsample_factor() const { return 1 << static_cast<int>(image_channels.size()); }
    void validate() const;
};

struct FusionOutput {
    NodePtr alpha;           // (h,w,1); constant 1 for the direct head
    NodePtr beta;            // (h,w,1); constant 0 for the direct head
    NodePtr depth_pre_clamp; // alpha * d0 + beta (or direct head output)
    NodePtr depth;           // clamped to [d_min, d_max]
};

// Refinement network: image branch + depth branch (sparse depth and the
// topology estimate), late fusion, half-resolution head upsampled to full.
class FusionNet {
public:
    explicit FusionNet(FusionNetConfig config, std::uint64_t seed = 2);

    FusionOutput forward(NodePtr image, NodePtr sparse_values, NodePtr d0) const;
    FusionOutput forward(const Tensor& image, const Tensor& sparse_values, const Tensor& d0) const;

    const FusionNetConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

private:
    FusionNetConfig config_;
    ParamStore params_;
};

// ----------------------------------------------------------------- PoseNet
struct PoseNetConfig {
    std::vector<int> channels{16, 32, 64, 128};
    int fc_hidden = 64;
    double leaky_slope = 0.1;
};

// Two-image encoder regressing a 6-DoF pose (translation + axis-angle).
class PoseNet {
public:
    explicit PoseNet(PoseNetConfig config = {}, std::uint64_t seed = 3);

    NodePtr forward_vector(NodePtr image_pair) const;  // (1,1,6): [t | w]
    PoseNodes forward(const Tensor& target, const Tensor& source) const;
    Pose infer(const Tensor& target, const Tensor& source) const;

    const PoseNetConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

private:
    PoseNetConfig config_;
    ParamStore params_;
};

PoseNodes pose_nodes_from_vector(NodePtr six);
Pose pose_from_vector(const Tensor& six);

}  // namespace sf
