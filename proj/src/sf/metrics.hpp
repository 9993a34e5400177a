#pragma once

#include <string>

#include "sf/tensor.hpp"

namespace sf {

// Benchmark error metrics. MAE/RMSE in millimeters, iMAE/iRMSE in 1/km.
struct MetricSet {
    double mae = 0.0;
    double rmse = 0.0;
    double imae = 0.0;
    double irmse = 0.0;
    long valid_count = 0;
};

struct DepthRange {
    double min_m = 0.2;
    double max_m = 5.0;
};

// Metrics over pixels that are valid and whose ground truth lies inside the
// range cap. Rejects an empty evaluation set.
MetricSet evaluate(const Tensor& pred_m, const Tensor& gt_m, const Tensor& valid,
                   const DepthRange& range);

// Absolute-error map as a color PNG (jet-style colormap, invalid pixels
// black). Returns the maximum error used for normalization.
double write_error_map(const std::string& path, const Tensor& pred_m, const Tensor& gt_m,
                       const Tensor& valid);

// Depth visualization with the same colormap (near = blue, far = red).
void write_depth_map(const std::string& path, const Tensor& depth_m, double min_m, double max_m);

void jet_color(double t, double rgb[3]);

}  // namespace sf
