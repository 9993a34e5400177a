#include "sf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sf/common.hpp"
#include "sf/png_io.hpp"

namespace sf {

MetricSet evaluate(const Tensor& pred_m, const Tensor& gt_m, const Tensor& valid,
                   const DepthRange& range) {
    require(pred_m.same_shape(gt_m) && pred_m.same_shape(valid), "evaluate: shape mismatch");
    MetricSet m;
    double se = 0, ae = 0, ise = 0, iae = 0;
    for (std::size_t i = 0; i < pred_m.size(); ++i) {
        if (valid[i] == 0.0) continue;
        const double gt = gt_m[i];
        if (gt < range.min_m || gt > range.max_m) continue;
        const double pr = pred_m[i];
        require(pr > 0.0 && gt > 0.0, "evaluate: depths must be positive on the valid set");
        const double e = pr - gt;
        const double ie = 1.0 / pr - 1.0 / gt;
        ae += std::fabs(e);
        se += e * e;
        iae += std::fabs(ie);
        ise += ie * ie;
        ++m.valid_count;
    }
    require(m.valid_count > 0, "evaluate: no valid pixels after range capping");
    const double n = static_cast<double>(m.valid_count);
    m.mae = ae / n * 1000.0;                 // m -> mm
    m.rmse = std::sqrt(se / n) * 1000.0;
    m.imae = iae / n * 1000.0;               // 1/m -> 1/km
    m.irmse = std::sqrt(ise / n) * 1000.0;
    return m;
}

void jet_color(double t, double rgb[3]) {
    t = std::min(1.0, std::max(0.0, t));
    rgb[0] = std::min(1.0, std::max(0.0, 1.5 - std::fabs(4.0 * t - 3.0)));
    rgb[1] = std::min(1.0, std::max(0.0, 1.5 - std::fabs(4.0 * t - 2.0)));
    rgb[2] = std::min(1.0, std::max(0.0, 1.5 - std::fabs(4.0 * t - 1.0)));
}

double write_error_map(const std::string& path, const Tensor& pred_m, const Tensor& gt_m,
                       const Tensor& valid) {
    require(pred_m.same_shape(gt_m) && pred_m.same_shape(valid), "error_map: shape mismatch");
    double max_err = 0.0;
    for (std::size_t i = 0; i < pred_m.size(); ++i)
        if (valid[i] != 0.0) max_err = std::max(max_err, std::fabs(pred_m[i] - gt_m[i]));
    Tensor img = Tensor::hwc(pred_m.h, pred_m.w, 3);
    for (int y = 0; y < pred_m.h; ++y)
        for (int x = 0; x < pred_m.w; ++x) {
            if (valid.at(y, x, 0) == 0.0) continue;  // invalid stays black
            const double e = std::fabs(pred_m.at(y, x, 0) - gt_m.at(y, x, 0));
            double rgb[3];
            jet_color(max_err > 0 ? e / max_err : 0.0, rgb);
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = rgb[ch];
        }
    write_png_rgb8(path, img);
    return max_err;
}

void write_depth_map(const std::string& path, const Tensor& depth_m, double min_m, double max_m) {
    Tensor img = Tensor::hwc(depth_m.h, depth_m.w, 3);
    const double span = std::max(1e-9, max_m - min_m);
    for (int y = 0; y < depth_m.h; ++y)
        for (int x = 0; x < depth_m.w; ++x) {
            const double d = depth_m.at(y, x, 0);
            if (d <= 0.0) continue;
            double rgb[3];
            jet_color((d - min_m) / span, rgb);
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = rgb[ch];
        }
    write_png_rgb8(path, img);
}

}  // namespace sf
