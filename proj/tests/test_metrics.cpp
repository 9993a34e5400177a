#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "sf/common.hpp"
#include "sf/metrics.hpp"
#include "sf/png_io.hpp"
#include "testutil.hpp"

using namespace sf;

namespace {

// Independent two-pass oracle: gather valid errors first, reduce second.
MetricSet naive_metrics(const Tensor& pred, const Tensor& gt, const Tensor& valid,
                        const DepthRange& range) {
    std::vector<double> errs, ierrs;
    for (int y = 0; y < pred.h; ++y)
        for (int x = 0; x < pred.w; ++x) {
            if (valid.at(y, x, 0) == 0.0) continue;
            if (gt.at(y, x, 0) < range.min_m || gt.at(y, x, 0) > range.max_m) continue;
            errs.push_back(pred.at(y, x, 0) - gt.at(y, x, 0));
            ierrs.push_back(1.0 / pred.at(y, x, 0) - 1.0 / gt.at(y, x, 0));
        }
    MetricSet m;
    m.valid_count = static_cast<long>(errs.size());
    double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
    for (double e : errs) {
        s1 += std::fabs(e);
        s2 += e * e;
    }
    for (double e : ierrs) {
        t1 += std::fabs(e);
        t2 += e * e;
    }
    const double n = static_cast<double>(errs.size());
    m.mae = s1 / n * 1000.0;
    m.rmse = std::sqrt(s2 / n) * 1000.0;
    m.imae = t1 / n * 1000.0;
    m.irmse = std::sqrt(t2 / n) * 1000.0;
    return m;
}

}  // namespace

TEST_CASE("perfect prediction scores zero") {
    Tensor gt = Tensor::hwc(6, 6, 1, 2.5);
    Tensor valid = Tensor::hwc(6, 6, 1, 1.0);
    const MetricSet m = evaluate(gt, gt, valid, {0.2, 5.0});
    CHECK(m.mae == 0.0);
    CHECK(m.rmse == 0.0);
    CHECK(m.imae == 0.0);
    CHECK(m.irmse == 0.0);
    CHECK(m.valid_count == 36);
}

TEST_CASE("two-pixel hand example") {
    Tensor pred = Tensor::hwc(1, 2, 1);
    Tensor gt = Tensor::hwc(1, 2, 1);
    Tensor valid = Tensor::hwc(1, 2, 1, 1.0);
    pred.at(0, 0, 0) = 2.0;
    pred.at(0, 1, 0) = 4.0;
    gt.at(0, 0, 0) = 1.0;
    gt.at(0, 1, 0) = 2.0;
    const MetricSet m = evaluate(pred, gt, valid, {0.1, 10.0});
    CHECK(m.mae == doctest::Approx(1500.0).epsilon(1e-12));
    CHECK(m.rmse == doctest::Approx(std::sqrt(2.5) * 1000.0).epsilon(1e-12));
    CHECK(m.imae == doctest::Approx(375.0).epsilon(1e-12));
    CHECK(m.irmse == doctest::Approx(std::sqrt((0.25 + 0.0625) / 2) * 1000.0).epsilon(1e-12));
}

TEST_CASE("ground truth outside the range cap is excluded") {
    Tensor pred = Tensor::hwc(1, 3, 1, 2.0);
    Tensor gt = Tensor::hwc(1, 3, 1);
    Tensor valid = Tensor::hwc(1, 3, 1, 1.0);
    gt.at(0, 0, 0) = 2.0;
    gt.at(0, 1, 0) = 0.1;  // below the cap
    gt.at(0, 2, 0) = 7.0;  // above the cap
    const MetricSet m = evaluate(pred, gt, valid, {0.2, 5.0});
    CHECK(m.valid_count == 1);
    CHECK(m.mae == 0.0);

    Tensor none = Tensor::hwc(1, 3, 1, 0.0);
    CHECK_THROWS_AS(evaluate(pred, gt, none, {0.2, 5.0}), Error);
}

TEST_CASE("metrics equal the naive oracle on random instances") {
    Rng rng(60);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 4 + (int)rng.below(8), w = 4 + (int)rng.below(8);
        Tensor pred = Tensor::hwc(h, w, 1);
        Tensor gt = Tensor::hwc(h, w, 1);
        Tensor valid = Tensor::hwc(h, w, 1);
        for (int i = 0; i < h * w; ++i) {
            pred[i] = rng.uniform(0.3, 6.0);
            gt[i] = rng.uniform(0.1, 7.0);
            valid[i] = rng.uniform() < 0.8 ? 1.0 : 0.0;
        }
        valid[0] = 1.0;
        gt[0] = 2.0;  // at least one valid in-range pixel
        const DepthRange range{0.2, 5.0};
        const MetricSet a = evaluate(pred, gt, valid, range);
        const MetricSet b = naive_metrics(pred, gt, valid, range);
        CHECK(std::fabs(a.mae - b.mae) < 1e-9);
        CHECK(std::fabs(a.rmse - b.rmse) < 1e-9);
        CHECK(std::fabs(a.imae - b.imae) < 1e-9);
        CHECK(std::fabs(a.irmse - b.irmse) < 1e-9);
        CHECK(a.valid_count == b.valid_count);
        // Cauchy-Schwarz orderings.
        CHECK(a.rmse >= a.mae - 1e-12);
        CHECK(a.irmse >= a.imae - 1e-12);
    }
}

TEST_CASE("permutation invariance and scaling behavior") {
    Rng rng(61);
    const int n = 24;
    Tensor pred = Tensor::hwc(1, n, 1);
    Tensor gt = Tensor::hwc(1, n, 1);
    Tensor valid = Tensor::hwc(1, n, 1, 1.0);
    for (int i = 0; i < n; ++i) {
        pred[i] = rng.uniform(0.5, 4.0);
        gt[i] = rng.uniform(0.5, 4.0);
    }
    const DepthRange wide{1e-6, 1e6};
    const MetricSet base = evaluate(pred, gt, valid, wide);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    Tensor pred_p = pred, gt_p = gt;
    for (int i = 0; i < n; ++i) {
        pred_p[i] = pred[perm[i]];
        gt_p[i] = gt[perm[i]];
    }
    const MetricSet shuffled = evaluate(pred_p, gt_p, valid, wide);
    CHECK(shuffled.mae == doctest::Approx(base.mae).epsilon(1e-12));
    CHECK(shuffled.rmse == doctest::Approx(base.rmse).epsilon(1e-12));

    const double s = 2.5;
    const MetricSet scaled = evaluate(pred * s, gt * s, valid, wide);
    CHECK(scaled.mae == doctest::Approx(base.mae * s).epsilon(1e-9));
    CHECK(scaled.rmse == doctest::Approx(base.rmse * s).epsilon(1e-9));
    CHECK(scaled.imae == doctest::Approx(base.imae / s).epsilon(1e-9));
    CHECK(scaled.irmse == doctest::Approx(base.irmse / s).epsilon(1e-9));
}

TEST_CASE("error map: dimensions, black invalid pixels, hot pixel") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path() / "sf_metrics_test";
    fs::create_directories(dir);

    Tensor gt = Tensor::hwc(10, 12, 1, 2.0);
    Tensor pred = gt;
    Tensor valid = Tensor::hwc(10, 12, 1, 1.0);
    valid.at(0, 0, 0) = 0.0;

    SUBCASE("uniform prediction gives the lowest color everywhere") {
        const double max_err = write_error_map(dir + "/uniform.png", pred, gt, valid);
        CHECK(max_err == 0.0);
        const Tensor img = read_png_rgb8(dir + "/uniform.png");
        CHECK(img.h == 10);
        CHECK(img.w == 12);
        // Invalid pixel stays black.
        for (int ch = 0; ch < 3; ++ch) CHECK(img.at(0, 0, ch) == 0.0);
        // All valid pixels share the zero-error color.
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 12; ++x) {
                if (y == 0 && x == 0) continue;
                for (int ch = 0; ch < 3; ++ch) CHECK(img.at(y, x, ch) == img.at(5, 5, ch));
            }
    }

    SUBCASE("a single bad pixel is the single hottest pixel") {
        pred.at(4, 7, 0) = 4.0;
        write_error_map(dir + "/hot.png", pred, gt, valid);
        const Tensor img = read_png_rgb8(dir + "/hot.png");
        double hot[3];
        jet_color(1.0, hot);
        for (int ch = 0; ch < 3; ++ch)
            CHECK(img.at(4, 7, ch) == doctest::Approx(hot[ch]).epsilon(0.01));
        int hottest = 0;
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 12; ++x)
                if (img.at(y, x, 0) > 0.3 && img.at(y, x, 2) < 0.1) ++hottest;
        CHECK(hottest == 1);
    }
}
