#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sf/common.hpp"
#include "sf/spp.hpp"
#include "testutil.hpp"

using namespace sf;

namespace {

NodePtr sparse_leaf(const Tensor& values) {
    Tensor t = Tensor::hwc(values.h, values.w, 2);
    for (int y = 0; y < values.h; ++y)
        for (int x = 0; x < values.w; ++x) {
            t.at(y, x, 0) = values.at(y, x, 0);
            t.at(y, x, 1) = values.at(y, x, 0) > 0 ? 1.0 : 0.0;
        }
    return make_const(std::move(t));
}

SppWeights make_weights(int pyr_channels, int c, Rng& rng, bool zero = false) {
    SppWeights w;
    auto t = [&](int kin, int kout) {
        Tensor m = Tensor::conv_weight(1, 1, kin, kout);
        if (!zero)
            for (double& v : m.data) v = rng.uniform(-0.5, 0.5);
        return make_leaf(std::move(m), true);
    };
    w.w1 = t(pyr_channels, c);
    w.b1 = make_leaf(Tensor::vec(c), true);
    w.w2 = t(c, c);
    w.b2 = make_leaf(Tensor::vec(c), true);
    w.w3 = t(c, c);
    w.b3 = make_leaf(Tensor::vec(c), true);
    return w;
}

}  // namespace

TEST_CASE("spp config validation") {
    SppConfig ok;
    ok.kernel_sizes = {5, 7, 9};
    ok.validate();
    SppConfig even;
    even.kernel_sizes = {4};
    CHECK_THROWS_AS(even.validate(), Error);
    SppConfig non_increasing;
    non_increasing.kernel_sizes = {7, 5};
    CHECK_THROWS_AS(non_increasing.validate(), Error);
}

TEST_CASE("single nonzero pixel spreads to a k x k block at each level") {
    Tensor vals = Tensor::hwc(16, 16, 1);
    vals.at(7, 9, 0) = 3.25;
    NodePtr pyr = pool_pyramid(sparse_leaf(vals), {5, 9});
    CHECK(pyr->value.c == 6);
    for (int level = 0; level < 2; ++level) {
        const int k = level == 0 ? 5 : 9;
        const int r = (k - 1) / 2;
        const int ch = 2 + 2 * level;  // value channel of this level
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const bool inside = std::abs(y - 7) <= r && std::abs(x - 9) <= r;
                CHECK(pyr->value.at(y, x, ch) == (inside ? 3.25 : 0.0));
            }
    }
}

TEST_CASE("dense input keeps every validity channel saturated") {
    Tensor vals = Tensor::hwc(12, 12, 1, 2.0);
    NodePtr pyr = pool_pyramid(sparse_leaf(vals), {3, 5, 7});
    for (int level = 0; level <= 3; ++level)
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x) CHECK(pyr->value.at(y, x, 2 * level + 1) == 1.0);
}

TEST_CASE("empty kernel list is the identity") {
    Tensor vals = Tensor::hwc(8, 8, 1);
    vals.at(2, 2, 0) = 1.5;
    NodePtr in = sparse_leaf(vals);
    NodePtr out = pool_pyramid(in, {});
    CHECK(out.get() == in.get());
}

TEST_CASE("support growth equals morphological dilation (brute force)") {
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor vals = Tensor::hwc(14, 18, 1);
        for (int i = 0; i < 9; ++i)
            vals.at(rng.below(14), rng.below(18), 0) = rng.uniform(0.5, 4.0);
        const std::vector<int> kernels = {3, 7};
        NodePtr pyr = pool_pyramid(sparse_leaf(vals), kernels);
        for (std::size_t level = 0; level < kernels.size(); ++level) {
            const int r = (kernels[level] - 1) / 2;
            for (int y = 0; y < 14; ++y)
                for (int x = 0; x < 18; ++x) {
                    bool dilated = false;  // brute-force dilation oracle
                    for (int dy = -r; dy <= r && !dilated; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            const int yy = y + dy, xx = x + dx;
                            if (yy >= 0 && yy < 14 && xx >= 0 && xx < 18 &&
                                vals.at(yy, xx, 0) > 0) {
                                dilated = true;
                                break;
                            }
                        }
                    const bool has = pyr->value.at(y, x, 2 * (1 + level)) > 0;
                    CHECK(has == dilated);
                }
        }
    }
}

TEST_CASE("translation equivariance in the interior") {
    Rng rng(18);
    Tensor vals = Tensor::hwc(20, 20, 1);
    for (int i = 0; i < 12; ++i)
        vals.at(4 + rng.below(10), 4 + rng.below(10), 0) = rng.uniform(0.5, 4.0);
    Tensor shifted = Tensor::hwc(20, 20, 1);
    const int sx = 2, sy = 1;
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            const int ys = y - sy, xs = x - sx;
            if (ys >= 0 && ys < 20 && xs >= 0 && xs < 20) shifted.at(y, x, 0) = vals.at(ys, xs, 0);
        }
    NodePtr a = pool_pyramid(sparse_leaf(vals), {5, 7});
    NodePtr b = pool_pyramid(sparse_leaf(shifted), {5, 7});
    // Compare away from borders by the largest radius + shift.
    for (int y = 5; y < 15; ++y)
        for (int x = 5; x < 15; ++x)
            for (int ch = 0; ch < a->value.c; ++ch)
                CHECK(a->value.at(y, x, ch) == b->value.at(y + sy, x + sx, ch));
}

TEST_CASE("fuse: zero weights yield a zero map; channel mismatch rejected") {
    Rng rng(19);
    Tensor vals = Tensor::hwc(10, 10, 1);
    vals.at(5, 5, 0) = 2.0;
    NodePtr pyr = pool_pyramid(sparse_leaf(vals), {5});
    SppWeights zero = make_weights(4, 8, rng, true);
    NodePtr fused = spp_fuse(pyr, zero);
    CHECK(fused->value.max_abs() == 0.0);
    CHECK(fused->value.c == 8);

    SppWeights wrong = make_weights(6, 8, rng);
    CHECK_THROWS_AS(spp_fuse(pyr, wrong), Error);
}

TEST_CASE("fuse: identity-like first-layer weights pass levels through") {
    Rng rng(20);
    Tensor vals = Tensor::hwc(10, 10, 1);
    vals.at(3, 4, 0) = 1.75;
    NodePtr pyr = pool_pyramid(sparse_leaf(vals), {5});
    // w1 copies channel 2 (the pooled value level); later layers copy ch 0.
    SppWeights w = make_weights(4, 4, rng, true);
    w.w1->value.wt(0, 0, 2, 0) = 1.0;
    w.w2->value.wt(0, 0, 0, 0) = 1.0;
    w.w3->value.wt(0, 0, 0, 0) = 1.0;
    NodePtr fused = spp_fuse(pyr, w);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x)
            CHECK(fused->value.at(y, x, 0) == pyr->value.at(y, x, 2));
}

TEST_CASE("receptive field of the fused output equals the largest kernel") {
    Rng rng(21);
    const int N = 21;
    Tensor base = Tensor::hwc(N, N, 1);
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N; ++x) base.at(y, x, 0) = rng.uniform(0.5, 3.0);
    const std::vector<int> kernels = {3, 5, 9};
    SppWeights w = make_weights(2 * (1 + kernels.size()), 6, rng);

    const Tensor out0 = spp_fuse(pool_pyramid(sparse_leaf(base), kernels), w)->value;
    Tensor poked = base;
    poked.at(10, 10, 0) += 1.7;
    const Tensor out1 = spp_fuse(pool_pyramid(sparse_leaf(poked), kernels), w)->value;

    int max_dist = 0;
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N; ++x)
            for (int ch = 0; ch < 6; ++ch)
                if (out0.at(y, x, ch) != out1.at(y, x, ch))
                    max_dist = std::max(max_dist, std::max(std::abs(y - 10), std::abs(x - 10)));
    CHECK(max_dist == (9 - 1) / 2);  // pointwise layers add nothing
}
