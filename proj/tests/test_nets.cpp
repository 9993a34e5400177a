#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "sf/common.hpp"
#include "sf/nets.hpp"
#include "testutil.hpp"

using namespace sf;

namespace {

Tensor random_sparse_input(int h, int w, double density, Rng& rng) {
    Tensor t = Tensor::hwc(h, w, 2);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (rng.uniform() < density) {
                t.at(y, x, 0) = rng.uniform(0.5, 5.0);
                t.at(y, x, 1) = 1.0;
            }
    return t;
}

void zero_params(ParamStore& ps) {
    for (const auto& [name, p] : ps.items()) p->value.fill(0.0);
}

}  // namespace

TEST_CASE("conv_param_count: 1x1 conv with bias") {
    CHECK(conv_param_count(1, 10, 32, true) == 352);  // 10*32 + 32
    CHECK(conv_param_count(3, 2, 4, false) == 72);
}

TEST_CASE("paper-preset parameter budgets") {
    const ScaffNet scaff(ScaffNetConfig::paper_preset());
    const double sc = static_cast<double>(scaff.params().param_count());
    MESSAGE("scaffnet params: ", sc);
    CHECK(std::fabs(sc - 1.4e6) / 1.4e6 < 0.05);

    const ScaffNet scaff_scan(ScaffNetConfig::paper_preset_scanline());
    CHECK(std::fabs(static_cast<double>(scaff_scan.params().param_count()) - 1.4e6) / 1.4e6 < 0.05);

    const FusionNet fusion(FusionNetConfig::paper_preset());
    const double fc = static_cast<double>(fusion.params().param_count());
    MESSAGE("fusionnet params: ", fc);
    CHECK(std::fabs(fc - 6.4e6) / 6.4e6 < 0.05);
}

TEST_CASE("scaffnet: zero weights with an output bias give a constant softplus map") {
    ScaffNetConfig cfg = ScaffNetConfig::tiny_preset();
    ScaffNet net(cfg);
    zero_params(net.params());
    const double b = 0.7;
    net.params().find("out_head.b")->value[0] = b;
    Rng rng(3);
    const Tensor out = net.infer(random_sparse_input(64, 64, 0.02, rng));
    const double expect = std::log1p(std::exp(b)) + cfg.d_floor;
    for (double v : out.data) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("scaffnet: output resolution equals input resolution; output positive") {
    Rng rng(5);
    ScaffNet net(ScaffNetConfig::tiny_preset());
    const Tensor out = net.infer(random_sparse_input(128, 160, 0.01, rng));
    CHECK(out.h == 128);
    CHECK(out.w == 160);
    CHECK(out.c == 1);
    for (double v : out.data) CHECK(v > 0.0);
}

TEST_CASE("scaffnet rejects indivisible resolutions with a padding report") {
    Rng rng(6);
    ScaffNet net(ScaffNetConfig::tiny_preset());
    try {
        net.infer(random_sparse_input(120, 160, 0.01, rng));
        FAIL("expected rejection");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("pad to") != std::string::npos);
        CHECK(msg.find("160x128") != std::string::npos);
    }
}

TEST_CASE("scaffnet forward is bit-stable") {
    Rng rng(7);
    ScaffNet net(ScaffNetConfig::tiny_preset());
    const Tensor in = random_sparse_input(64, 64, 0.02, rng);
    const Tensor a = net.infer(in);
    const Tensor b = net.infer(in);
    CHECK(a.data == b.data);
}

TEST_CASE("fusionnet: constructed head init reproduces the topology estimate") {
    Rng rng(8);
    FusionNetConfig cfg = FusionNetConfig::tiny_preset();
    FusionNet net(cfg);
    // Zero the head: alpha = 1, beta = 0 exactly.
    net.params().find("dec_conv2.w")->value.fill(0.0);
    net.params().find("dec_conv2.b")->value[0] = 1.0;
    net.params().find("dec_conv2.b")->value[1] = 0.0;

    const Tensor img = sftest::smooth_image(64, 96, 3, rng);
    const Tensor d0 = sftest::smooth_depth(64, 96, 2.0, rng);
    Tensor z = Tensor::hwc(64, 96, 1);
    const FusionOutput out = net.forward(img, z, d0);
    for (std::size_t i = 0; i < d0.size(); ++i) {
        CHECK(std::fabs(out.alpha->value[i] - 1.0) < 1e-12);
        CHECK(std::fabs(out.beta->value[i]) < 1e-12);
        CHECK(std::fabs(out.depth->value[i] - d0[i]) < 1e-6);
    }
}

TEST_CASE("composition is exactly linear in alpha and beta before clamping") {
    Rng rng(9);
    FusionNetConfig cfg = FusionNetConfig::tiny_preset();
    FusionNet net(cfg);
    net.params().find("dec_conv2.w")->value.fill(0.0);
    NodePtr bias = net.params().find("dec_conv2.b");
    const Tensor img = sftest::smooth_image(32, 32, 3, rng);
    const Tensor d0 = sftest::smooth_depth(32, 32, 2.0, rng);
    Tensor z = Tensor::hwc(32, 32, 1);

    auto pre_clamp = [&](double alpha_bias, double beta_bias) {
        bias->value[0] = alpha_bias;
        bias->value[1] = beta_bias;
        return net.forward(img, z, d0).depth_pre_clamp->value;
    };
    const double eps = 0.25;
    const Tensor base = pre_clamp(1.0, 0.0);
    const Tensor dalpha = pre_clamp(1.0 + eps, 0.0);
    const Tensor dbeta = pre_clamp(1.0, eps);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK((dalpha[i] - base[i]) / eps == doctest::Approx(d0[i]).epsilon(1e-12));
        CHECK((dbeta[i] - base[i]) / eps == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fusionnet rejects mismatched shapes") {
    Rng rng(10);
    FusionNet net(FusionNetConfig::tiny_preset());
    const Tensor img = sftest::smooth_image(32, 32, 3, rng);
    const Tensor d0 = sftest::smooth_depth(32, 64, 2.0, rng);
    Tensor z = Tensor::hwc(32, 32, 1);
    CHECK_THROWS_AS(net.forward(img, z, d0), Error);
}

TEST_CASE("fusionnet direct head stays positive and within the clamp range") {
    Rng rng(11);
    FusionNetConfig cfg = FusionNetConfig::tiny_preset();
    cfg.head = FusionHead::Direct;
    FusionNet net(cfg);
    const Tensor img = sftest::smooth_image(32, 32, 3, rng);
    const Tensor d0 = sftest::smooth_depth(32, 32, 2.0, rng);
    Tensor z = Tensor::hwc(32, 32, 1);
    const FusionOutput out = net.forward(img, z, d0);
    for (double v : out.depth->value.data) {
        CHECK(v >= cfg.d_min);
        CHECK(v <= cfg.d_max);
    }
}

TEST_CASE("posenet: zero head gives the identity pose; axis-angle matches Rodrigues") {
    Rng rng(12);
    PoseNet net;
    net.params().find("pose_fc2.w")->value.fill(0.0);
    net.params().find("pose_fc2.b")->value.fill(0.0);
    const Tensor a = sftest::smooth_image(32, 32, 3, rng);
    const Tensor b = sftest::smooth_image(32, 32, 3, rng);
    const Pose p = net.infer(a, b);
    CHECK(p.is_identity(0.0));
    p.validate();

    Tensor six = Tensor::vec(6);
    six[5] = 1.5707963267948966;  // 90 degrees about z
    const Pose r = pose_from_vector(six);
    CHECK(std::fabs(r.rotation[0]) < 1e-6);
    CHECK(std::fabs(r.rotation[1] + 1.0) < 1e-6);
    CHECK(std::fabs(r.rotation[3] - 1.0) < 1e-6);
    r.validate();
}

TEST_CASE("posenet output always passes pose invariants") {
    Rng rng(13);
    PoseNet net;
    for (int i = 0; i < 3; ++i) {
        const Tensor a = sftest::smooth_image(32, 32, 3, rng);
        const Tensor b = sftest::smooth_image(32, 32, 3, rng);
        net.infer(a, b).validate();
    }
}

TEST_CASE("gradient flow: every parameter tensor gets a nonzero gradient") {
    Rng rng(14);

    auto check_scaffnet = [&](const ScaffNetConfig& cfg, int h, int w) {
        ScaffNet net(cfg);
        const Tensor in = random_sparse_input(h, w, 0.3, rng);
        NodePtr out = net.forward(make_const(in));
        // A generic scalarization exercising all pixels.
        Tensor proj = Tensor::hwc(h, w, 1);
        for (double& v : proj.data) v = rng.uniform(0.5, 1.5);
        Gradients g = backward(masked_sum(out, proj));
        for (const auto& [name, p] : net.params().items()) {
            const Tensor* gp = g.find(p);
            REQUIRE_MESSAGE(gp != nullptr, name);
            CHECK_MESSAGE(gp->max_abs() > 0.0, name);
        }
    };
    check_scaffnet(ScaffNetConfig::tiny_preset(), 64, 64);
    check_scaffnet(ScaffNetConfig::paper_preset(), 32, 64);

    auto check_fusionnet = [&](FusionNetConfig cfg, int h, int w) {
        FusionNet net(cfg);
        const Tensor img = sftest::smooth_image(h, w, 3, rng);
        const Tensor d0 = sftest::smooth_depth(h, w, 2.0, rng);
        Tensor z = random_sparse_input(h, w, 0.1, rng);
        NodePtr zv = make_const(slice_c(make_const(z), 0, 1)->value);
        const FusionOutput out =
            net.forward(make_const(img), zv, make_const(d0));
        Tensor proj = Tensor::hwc(h, w, 1);
        for (double& v : proj.data) v = rng.uniform(0.5, 1.5);
        Gradients g = backward(masked_sum(out.depth_pre_clamp, proj));
        for (const auto& [name, p] : net.params().items()) {
            const Tensor* gp = g.find(p);
            REQUIRE_MESSAGE(gp != nullptr, name);
            CHECK_MESSAGE(gp->max_abs() > 0.0, name);
        }
    };
    check_fusionnet(FusionNetConfig::tiny_preset(), 64, 64);
    check_fusionnet(FusionNetConfig::paper_preset(), 32, 64);

    PoseNet pose;
    const Tensor a = sftest::smooth_image(32, 32, 3, rng);
    const Tensor b = sftest::smooth_image(32, 32, 3, rng);
    const PoseNodes pn = pose.forward(a, b);
    Tensor proj6 = Tensor::vec(3, 1.0);
    Gradients g = backward(add(masked_sum(pn.rotvec, proj6), masked_sum(pn.trans, proj6)));
    for (const auto& [name, p] : pose.params().items()) {
        const Tensor* gp = g.find(p);
        REQUIRE_MESSAGE(gp != nullptr, name);
        CHECK_MESSAGE(gp->max_abs() > 0.0, name);
    }
}

TEST_CASE("sparse input tensor respects the value/validity pairing") {
    SparseDepthMap sp;
    sp.values = Tensor::hwc(4, 4, 1);
    sp.validity = Tensor::hwc(4, 4, 1);
    sp.values.at(1, 2, 0) = 3.0;
    sp.validity.at(1, 2, 0) = 1.0;
    const Tensor t = sparse_input_tensor(sp);
    CHECK(t.c == 2);
    CHECK(t.at(1, 2, 0) == 3.0);
    CHECK(t.at(1, 2, 1) == 1.0);
    CHECK(t.at(0, 0, 1) == 0.0);
}
