#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sf/tensor.hpp"

namespace sf {

struct SparseDepthMap {
    Tensor values;    // (h,w,1) meters, 0 where absent
    Tensor validity;  // (h,w,1) in {0,1}
    double density() const;
    void validate() const;  // values > 0 <=> validity
};

enum class SamplingKind { HarrisKmeans, Scanline, Uniform };

SamplingKind sampling_kind_from_string(const std::string& s);
std::string sampling_kind_to_string(SamplingKind k);

struct SamplingStrategy {
    SamplingKind kind = SamplingKind::Uniform;
    int target_points = 375;
    // Per-frame spread of the point count: n drawn uniformly from
    // [n*(1-count_jitter), n*(1+count_jitter)], like the frame-to-frame
    // fluctuation of tracked features. 0 keeps the count fixed.
    double count_jitter = 0.0;
    // Harris parameters.
    double harris_kappa = 0.04;
    double harris_sigma = 1.0;
    // Scanline parameters; lines == 0 derives the count from target_points.
    int lines = 0;
    double dropout = 0.2;
    double angular_jitter_deg = 0.5;
};

struct PixelScore {
    int x = 0, y = 0;
    double score = 0.0;
};

// Harris corner response R = det(M) - kappa * trace(M)^2 from the Gaussian
// windowed structure tensor of Sobel gradients.
Tensor harris_response(const Tensor& gray, double kappa, double sigma);

Tensor rgb_to_gray(const Tensor& image);

// Lloyd k-means (k-means++ seeding) on pixel coordinates; each centroid is
// replaced by the nearest unused input point so outputs are detected pixels.
// If fewer than k candidates exist they are all returned and *shortfall is
// set to the missing count.
std::vector<PixelScore> kmeans_subsample(const std::vector<PixelScore>& points, int k,
                                         std::uint64_t seed, int* shortfall = nullptr);

// Horizontal scanline pattern concentrated in the lower image half with
// per-line vertical jitter, a small angular tilt and per-pixel dropout.
SparseDepthMap sample_scanlines(const Tensor& depth_gt, int lines, std::uint64_t jitter_seed,
                                double dropout = 0.2, double angular_jitter_deg = 0.5);

// Strategy dispatch. harris-kmeans requires the image.
SparseDepthMap make_sparse(const Tensor& depth_gt, const Tensor* image,
                           const SamplingStrategy& strategy, std::uint64_t seed);

}  // namespace sf
