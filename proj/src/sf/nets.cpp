#include "sf/nets.hpp"

#include <cmath>
#include <cstring>

#include "sf/common.hpp"
#include "sf/rng.hpp"

namespace sf {

NodePtr ParamStore::add(const std::string& name, Tensor init) {
    for (const auto& [n, p] : items_) require(n != name, "param store: duplicate name " + name);
    NodePtr leaf = make_leaf(std::move(init), true);
    items_.emplace_back(name, leaf);
    return leaf;
}

NodePtr ParamStore::find(const std::string& name) const {
    for (const auto& [n, p] : items_)
        if (n == name) return p;
    return nullptr;
}

std::size_t ParamStore::param_count() const {
    std::size_t total = 0;
    for (const auto& [n, p] : items_) total += p->value.size();
    return total;
}

std::uint64_t ParamStore::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, p] : items_) {
        h = fnv1a64(name, h);
        const auto& d = p->value.data;
        const char* bytes = reinterpret_cast<const char*>(d.data());
        h = fnv1a64(std::string_view(bytes, d.size() * sizeof(double)), h);
    }
    return h;
}

std::size_t conv_param_count(int k, int cin, int cout, bool bias) {
    return static_cast<std::size_t>(k) * k * cin * cout + (bias ? cout : 0);
}

Tensor sparse_input_tensor(const SparseDepthMap& sparse) {
    Tensor t = Tensor::hwc(sparse.values.h, sparse.values.w, 2);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) {
            t.at(y, x, 0) = sparse.values.at(y, x, 0);
            t.at(y, x, 1) = sparse.validity.at(y, x, 0);
        }
    return t;
}

namespace {

Tensor he_conv_init(int kh, int kw, int cin, int cout, Rng& rng, double scale = 1.0) {
    Tensor w = Tensor::conv_weight(kh, kw, cin, cout);
    const double limit = scale * std::sqrt(6.0 / (static_cast<double>(kh) * kw * cin));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    return w;
}

struct ConvLayer {
    NodePtr w, b;
};

ConvLayer add_conv(ParamStore& ps, const std::string& name, int k, int cin, int cout, Rng& rng,
                   double weight_scale = 1.0, double bias_init = 0.0) {
    ConvLayer l;
    l.w = ps.add(name + ".w", he_conv_init(k, k, cin, cout, rng, weight_scale));
    l.b = ps.add(name + ".b", Tensor::vec(cout, bias_init));
    return l;
}

// Resolution divisible by the stride pyramid, otherwise report the padding
// that would fix it.
void check_divisible(int h, int w, int factor, const char* net) {
    if (h % factor == 0 && w % factor == 0) return;
    const int ph = (h + factor - 1) / factor * factor;
    const int pw = (w + factor - 1) / factor * factor;
    throw Error(std::string(net) + ": input " + std::to_string(w) + "x" + std::to_string(h) +
                " not divisible by " + std::to_string(factor) + "; pad to " + std::to_string(pw) +
                "x" + std::to_string(ph));
}

}  // namespace

// ---------------------------------------------------------------- ScaffNet

ScaffNetConfig ScaffNetConfig::paper_preset() {
    ScaffNetConfig c;
    c.spp.kernel_sizes = {5, 7, 9, 11, 13};
    return c;
}

ScaffNetConfig ScaffNetConfig::paper_preset_scanline() {
    ScaffNetConfig c;
    c.spp.kernel_sizes = {5, 7, 9, 11};
    return c;
}

ScaffNetConfig ScaffNetConfig::tiny_preset() {
    ScaffNetConfig c;
    c.spp.kernel_sizes = {5, 7, 9, 11, 13};
    c.spp.conv_channels = 8;
    c.encoder = {8, 16, 24, 32, 49};
    c.decoder = {32, 24, 16, 16, 8};
    return c;
}

void ScaffNetConfig::validate() const {
    spp.validate();
    require(!encoder.empty() && decoder.size() == encoder.size(),
            "scaffnet config: decoder must have one entry per encoder stage");
    require(first_kernel % 2 == 1, "scaffnet config: first kernel must be odd");
    require(d_floor > 0, "scaffnet config: d_floor must be positive");
}

ScaffNet::ScaffNet(ScaffNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(derive_seed(seed, "scaffnet-init"));

    int in_ch = 2;
    if (config_.use_spp) {
        const int pyr = 2 * (1 + static_cast<int>(config_.spp.kernel_sizes.size()));
        const int cc = config_.spp.conv_channels;
        spp_weights_.w1 = params_.add("ssp_conv1.w", he_conv_init(1, 1, pyr, cc, rng));
        spp_weights_.b1 = params_.add("ssp_conv1.b", Tensor::vec(cc));
        spp_weights_.w2 = params_.add("ssp_conv2.w", he_conv_init(1, 1, cc, cc, rng));
        spp_weights_.b2 = params_.add("ssp_conv2.b", Tensor::vec(cc));
        spp_weights_.w3 = params_.add("output_ssp.w", he_conv_init(1, 1, cc, cc, rng));
        spp_weights_.b3 = params_.add("output_ssp.b", Tensor::vec(cc));
        in_ch = cc;
    }

    const auto& enc = config_.encoder;
    for (std::size_t i = 0; i < enc.size(); ++i) {
        const int k = i == 0 ? config_.first_kernel : 3;
        const std::string name = i + 1 == enc.size() ? "enc_latent" : "enc_conv" + std::to_string(i + 1);
        add_conv(params_, name, k, i == 0 ? in_ch : enc[i - 1], enc[i], rng);
    }
    const auto& dec = config_.decoder;
    int prev = enc.back();
    for (std::size_t j = 0; j + 1 < dec.size(); ++j) {
        const int level = static_cast<int>(dec.size()) - static_cast<int>(j);  // 5..2 naming
        add_conv(params_, "dec_deconv" + std::to_string(level), 3, prev, dec[j], rng);
        const int skip = enc[enc.size() - 2 - j];
        add_conv(params_, "dec_conv" + std::to_string(level), 3, dec[j] + skip, dec[j], rng);
        prev = dec[j];
    }
    add_conv(params_, "out_refine", 1, prev, dec.back(), rng);
    add_conv(params_, "out_head", 3, dec.back(), 1, rng, 1.0, config_.head_bias);
}

NodePtr ScaffNet::forward(NodePtr sparse_input) const {
    const Tensor& in = sparse_input->value;
    require(in.c == 2, "scaffnet: input must have 2 channels (depth, validity)");
    check_divisible(in.h, in.w, config_.downsample_factor(), "scaffnet");

    const double slope = config_.leaky_slope;
    NodePtr x = sparse_input;
    if (config_.use_spp) {
        x = pool_pyramid(std::move(x), config_.spp.kernel_sizes);
        x = spp_fuse(std::move(x), spp_weights_, slope);
    }

    std::vector<NodePtr> skips;
    const auto& enc = config_.encoder;
    for (std::size_t i = 0; i < enc.size(); ++i) {
        const std::string name = i + 1 == enc.size() ? "enc_latent" : "enc_conv" + std::to_string(i + 1);
        x = conv2d(std::move(x), params_.find(name + ".w"), params_.find(name + ".b"), 2);
        x = leaky_relu(std::move(x), slope);
        skips.push_back(x);
    }

    const auto& dec = config_.decoder;
    for (std::size_t j = 0; j + 1 < dec.size(); ++j) {
        const int level = static_cast<int>(dec.size()) - static_cast<int>(j);
        x = conv2d_transpose2(std::move(x), params_.find("dec_deconv" + std::to_string(level) + ".w"),
                              params_.find("dec_deconv" + std::to_string(level) + ".b"));
        x = leaky_relu(std::move(x), slope);
        x = concat_c({x, skips[skips.size() - 2 - j]});
        x = conv2d(std::move(x), params_.find("dec_conv" + std::to_string(level) + ".w"),
                   params_.find("dec_conv" + std::to_string(level) + ".b"), 1);
        x = leaky_relu(std::move(x), slope);
    }

    x = nn_upsample2(std::move(x));
    x = conv2d(std::move(x), params_.find("out_refine.w"), params_.find("out_refine.b"), 1);
    x = leaky_relu(std::move(x), slope);
    x = conv2d(std::move(x), params_.find("out_head.w"), params_.find("out_head.b"), 1);
    return add_scalar(softplus(std::move(x)), config_.d_floor);
}

Tensor ScaffNet::infer(const Tensor& sparse_input) const {
    return forward(make_const(sparse_input))->value;
}

// --------------------------------------------------------------- FusionNet

FusionNetConfig FusionNetConfig::paper_preset() { return {}; }

FusionNetConfig FusionNetConfig::tiny_preset() {
    FusionNetConfig c;
    c.image_channels = {12, 24, 48, 96, 96};
    c.depth_channels = {4, 8, 16, 32, 32};
    c.decoder_deconv = {64, 32, 32, 16};
    c.decoder_conv = {64, 32, 16};
    return c;
}

void FusionNetConfig::validate() const {
    require(image_channels.size() == depth_channels.size() && !image_channels.empty(),
            "fusionnet config: encoder branches must have matching depth");
    require(decoder_deconv.size() == image_channels.size() - 1,
            "fusionnet config: decoder must have one module per halving except the head");
    require(decoder_conv.size() == decoder_deconv.size() - 1,
            "fusionnet config: post-concat convs must leave the last module to the head");
    require(d_min > 0 && d_min < d_max, "fusionnet config: need 0 < d_min < d_max");
}

FusionNet::FusionNet(FusionNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(derive_seed(seed, "fusionnet-init"));

    const auto& ic = config_.image_channels;
    const auto& dc = config_.depth_channels;
    for (std::size_t i = 0; i < ic.size(); ++i) {
        const int k = i == 0 ? config_.first_kernel : 3;
        const std::string suffix =
            i + 1 == ic.size() ? "latent" : "conv" + std::to_string(i + 1);
        add_conv(params_, suffix == "latent" ? "latent_image" : suffix + "_image", k,
                 i == 0 ? 3 : ic[i - 1], ic[i], rng);
        add_conv(params_, suffix == "latent" ? "latent_depth" : suffix + "_depth", k,
                 i == 0 ? 2 : dc[i - 1], dc[i], rng);
    }

    const auto& dd = config_.decoder_deconv;
    const auto& dpc = config_.decoder_conv;
    int prev = ic.back() + dc.back();
    const int n_mod = static_cast<int>(dd.size());
    for (int j = 0; j < n_mod; ++j) {
        const int level = n_mod + 1 - j;  // 5..2 naming
        add_conv(params_, "dec_deconv" + std::to_string(level), 3, prev, dd[j], rng);
        const std::size_t si = ic.size() - 2 - j;  // skip from encoder stage si
        const int skip = ic[si] + dc[si];
        if (j + 1 < n_mod) {
            add_conv(params_, "dec_conv" + std::to_string(level), 3, dd[j] + skip, dpc[j], rng);
            prev = dpc[j];
        } else {
            // Half-resolution head. For the alpha/beta head the bias starts at
            // (1, 0) and the weights small, so training begins close to the
            // topology estimate.
            if (config_.head == FusionHead::AlphaBeta) {
                ConvLayer head = add_conv(params_, "dec_conv2", 3, dd[j] + skip, 2, rng, 0.01);
                head.b->value[0] = 1.0;
                head.b->value[1] = 0.0;
            } else {
                add_conv(params_, "dec_conv2", 3, dd[j] + skip, 1, rng, 0.01, config_.head_bias);
            }
        }
    }
}

FusionOutput FusionNet::forward(NodePtr image, NodePtr sparse_values, NodePtr d0) const {
    const Tensor& img = image->value;
    require(img.c == 3, "fusionnet: image must have 3 channels");
    require(sparse_values->value.c == 1 && d0->value.c == 1,
            "fusionnet: sparse depth and topology estimate must be single channel");
    require(img.h == d0->value.h && img.w == d0->value.w && img.h == sparse_values->value.h &&
                img.w == sparse_values->value.w,
            "fusionnet: input shapes disagree");
    check_divisible(img.h, img.w, config_.downsample_factor(), "fusionnet");

    const double slope = config_.leaky_slope;
    NodePtr xi = image;
    NodePtr xd = concat_c({sparse_values, d0});

    std::vector<NodePtr> skips_i, skips_d;
    const auto& ic = config_.image_channels;
    for (std::size_t i = 0; i < ic.size(); ++i) {
        const std::string suffix =
            i + 1 == ic.size() ? "latent" : "conv" + std::to_string(i + 1);
        const std::string ni = suffix == "latent" ? "latent_image" : suffix + "_image";
        const std::string nd = suffix == "latent" ? "latent_depth" : suffix + "_depth";
        xi = leaky_relu(conv2d(std::move(xi), params_.find(ni + ".w"), params_.find(ni + ".b"), 2), slope);
        xd = leaky_relu(conv2d(std::move(xd), params_.find(nd + ".w"), params_.find(nd + ".b"), 2), slope);
        skips_i.push_back(xi);
        skips_d.push_back(xd);
    }

    NodePtr x = concat_c({xi, xd});
    const int n_mod = static_cast<int>(config_.decoder_deconv.size());
    NodePtr head;
    for (int j = 0; j < n_mod; ++j) {
        const int level = n_mod + 1 - j;
        x = conv2d_transpose2(std::move(x), params_.find("dec_deconv" + std::to_string(level) + ".w"),
                              params_.find("dec_deconv" + std::to_string(level) + ".b"));
        x = leaky_relu(std::move(x), slope);
        const std::size_t si = skips_i.size() - 2 - j;
        x = concat_c({x, skips_i[si], skips_d[si]});
        if (j + 1 < n_mod) {
            x = conv2d(std::move(x), params_.find("dec_conv" + std::to_string(level) + ".w"),
                       params_.find("dec_conv" + std::to_string(level) + ".b"), 1);
            x = leaky_relu(std::move(x), slope);
        } else {
            head = conv2d(std::move(x), params_.find("dec_conv2.w"), params_.find("dec_conv2.b"), 1);
        }
    }
    head = nn_upsample2(std::move(head));

    FusionOutput out;
    if (config_.head == FusionHead::AlphaBeta) {
        out.alpha = slice_c(head, 0, 1);
        out.beta = slice_c(head, 1, 1);
        out.depth_pre_clamp = add(mul(out.alpha, d0), out.beta);
    } else {
        out.alpha = make_const(Tensor::hwc(img.h, img.w, 1, 1.0));
        out.beta = make_const(Tensor::hwc(img.h, img.w, 1, 0.0));
        out.depth_pre_clamp = softplus(std::move(head));
    }
    out.depth = clamp_node(out.depth_pre_clamp, config_.d_min, config_.d_max);
    return out;
}

FusionOutput FusionNet::forward(const Tensor& image, const Tensor& sparse_values,
                                const Tensor& d0) const {
    return forward(make_const(image), make_const(sparse_values), make_const(d0));
}

// ----------------------------------------------------------------- PoseNet

PoseNet::PoseNet(PoseNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
    Rng rng(derive_seed(seed, "posenet-init"));
    const auto& ch = config_.channels;
    for (std::size_t i = 0; i < ch.size(); ++i)
        add_conv(params_, "pose_conv" + std::to_string(i + 1), 3, i == 0 ? 6 : ch[i - 1], ch[i], rng);
    add_conv(params_, "pose_fc1", 1, ch.back(), config_.fc_hidden, rng);
    // Small head keeps the initial pose near identity.
    add_conv(params_, "pose_fc2", 1, config_.fc_hidden, 6, rng, 0.01);
}

NodePtr PoseNet::forward_vector(NodePtr image_pair) const {
    require(image_pair->value.c == 6, "posenet: expected a stacked image pair (6 channels)");
    const double slope = config_.leaky_slope;
    NodePtr x = std::move(image_pair);
    for (std::size_t i = 0; i < config_.channels.size(); ++i) {
        const std::string n = "pose_conv" + std::to_string(i + 1);
        x = leaky_relu(conv2d(std::move(x), params_.find(n + ".w"), params_.find(n + ".b"), 2), slope);
    }
    x = global_mean(std::move(x));
    x = leaky_relu(conv2d(std::move(x), params_.find("pose_fc1.w"), params_.find("pose_fc1.b"), 1), slope);
    x = conv2d(std::move(x), params_.find("pose_fc2.w"), params_.find("pose_fc2.b"), 1);
    return x;
}

PoseNodes pose_nodes_from_vector(NodePtr six) {
    require(six->value.size() == 6, "pose vector must have 6 entries");
    PoseNodes pn;
    pn.trans = slice_c(six, 0, 3);
    pn.rotvec = slice_c(six, 3, 3);
    return pn;
}

Pose pose_from_vector(const Tensor& six) {
    require(six.size() == 6, "pose vector must have 6 entries");
    Pose p;
    p.rotation = rodrigues({six[3], six[4], six[5]});
    p.translation = {six[0], six[1], six[2]};
    return p;
}

PoseNodes PoseNet::forward(const Tensor& target, const Tensor& source) const {
    require(target.same_shape(source), "posenet: images must share resolution");
    Tensor pair = Tensor::hwc(target.h, target.w, 6);
    for (int y = 0; y < target.h; ++y)
        for (int x = 0; x < target.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                pair.at(y, x, ch) = target.at(y, x, ch);
                pair.at(y, x, 3 + ch) = source.at(y, x, ch);
            }
    return pose_nodes_from_vector(forward_vector(make_const(std::move(pair))));
}

Pose PoseNet::infer(const Tensor& target, const Tensor& source) const {
    const PoseNodes pn = forward(target, source);
    Tensor six = Tensor::vec(6);
    for (int i = 0; i < 3; ++i) {
        six[i] = pn.trans->value[i];
        six[3 + i] = pn.rotvec->value[i];
    }
    return pose_from_vector(six);
}

}  // namespace sf
