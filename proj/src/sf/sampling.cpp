#include "sf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sf/common.hpp"
#include "sf/rng.hpp"

namespace sf {

double SparseDepthMap::density() const {
    return validity.size() ? validity.sum() / static_cast<double>(validity.size()) : 0.0;
}

void SparseDepthMap::validate() const {
    require(values.same_shape(validity), "sparse map: shape mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        const bool has = values[i] > 0.0;
        require(has == (validity[i] != 0.0), "sparse map: values > 0 must match validity");
    }
}

SamplingKind sampling_kind_from_string(const std::string& s) {
    if (s == "harris-kmeans" || s == "corner") return SamplingKind::HarrisKmeans;
    if (s == "scanline") return SamplingKind::Scanline;
    if (s == "uniform") return SamplingKind::Uniform;
    throw Error("unknown sampling strategy '" + s + "'");
}

std::string sampling_kind_to_string(SamplingKind k) {
    switch (k) {
        case SamplingKind::HarrisKmeans: return "harris-kmeans";
        case SamplingKind::Scanline: return "scanline";
        default: return "uniform";
    }
}

Tensor rgb_to_gray(const Tensor& image) {
    Tensor g = Tensor::hwc(image.h, image.w, 1);
    for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
            double s = 0;
            for (int ch = 0; ch < image.c; ++ch) s += image.at(y, x, ch);
            g.at(y, x, 0) = s / image.c;
        }
    return g;
}

namespace {

// Replicate-border access.
double px(const Tensor& t, int y, int x) {
    y = std::min(t.h - 1, std::max(0, y));
    x = std::min(t.w - 1, std::max(0, x));
    return t.at(y, x, 0);
}

Tensor gaussian_blur(const Tensor& in, double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<double> k(2 * r + 1);
    double s = 0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        s += k[i + r];
    }
    for (double& v : k) v /= s;
    Tensor tmp = Tensor::hwc(in.h, in.w, 1), out = Tensor::hwc(in.h, in.w, 1);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            double acc = 0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * px(in, y, x + i);
            tmp.at(y, x, 0) = acc;
        }
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            double acc = 0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * px(tmp, y + i, x);
            out.at(y, x, 0) = acc;
        }
    return out;
}

}  // namespace

Tensor harris_response(const Tensor& gray, double kappa, double sigma) {
    require(gray.c == 1, "harris_response: expected grayscale input");
    for (double v : gray.data) require(std::isfinite(v), "harris_response: non-finite input");
    const int h = gray.h, w = gray.w;
    Tensor ixx = Tensor::hwc(h, w, 1), iyy = Tensor::hwc(h, w, 1), ixy = Tensor::hwc(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // Sobel gradients with replicated borders.
            const double gx = (px(gray, y - 1, x + 1) + 2 * px(gray, y, x + 1) + px(gray, y + 1, x + 1)) -
                              (px(gray, y - 1, x - 1) + 2 * px(gray, y, x - 1) + px(gray, y + 1, x - 1));
            const double gy = (px(gray, y + 1, x - 1) + 2 * px(gray, y + 1, x) + px(gray, y + 1, x + 1)) -
                              (px(gray, y - 1, x - 1) + 2 * px(gray, y - 1, x) + px(gray, y - 1, x + 1));
            ixx.at(y, x, 0) = gx * gx;
            iyy.at(y, x, 0) = gy * gy;
            ixy.at(y, x, 0) = gx * gy;
        }
    ixx = gaussian_blur(ixx, sigma);
    iyy = gaussian_blur(iyy, sigma);
    ixy = gaussian_blur(ixy, sigma);
    Tensor r = Tensor::hwc(h, w, 1);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double det = ixx[i] * iyy[i] - ixy[i] * ixy[i];
        const double tr = ixx[i] + iyy[i];
        r[i] = det - kappa * tr * tr;
    }
    return r;
}

std::vector<PixelScore> kmeans_subsample(const std::vector<PixelScore>& points, int k,
                                         std::uint64_t seed, int* shortfall) {
    require(k >= 1, "kmeans_subsample: k must be >= 1");
    if (shortfall) *shortfall = 0;
    if (static_cast<int>(points.size()) <= k) {
        if (shortfall) *shortfall = k - static_cast<int>(points.size());
        return points;
    }
    Rng rng(seed);
    const int n = static_cast<int>(points.size());

    // k-means++ seeding on 2D pixel coordinates.
    std::vector<std::pair<double, double>> centroids;
    centroids.reserve(k);
    std::vector<double> d2(n, 1e300);
    {
        const PixelScore& first = points[rng.below(n)];
        centroids.emplace_back(first.x, first.y);
    }
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0;
        for (int i = 0; i < n; ++i) {
            const double dx = points[i].x - centroids.back().first;
            const double dy = points[i].y - centroids.back().second;
            d2[i] = std::min(d2[i], dx * dx + dy * dy);
            total += d2[i];
        }
        double pick = rng.uniform() * total;
        int chosen = n - 1;
        for (int i = 0; i < n; ++i) {
            pick -= d2[i];
            if (pick <= 0) { chosen = i; break; }
        }
        centroids.emplace_back(points[chosen].x, points[chosen].y);
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 50; ++iter) {
        for (int i = 0; i < n; ++i) {
            double best = 1e300;
            int bi = 0;
            for (int j = 0; j < k; ++j) {
                const double dx = points[i].x - centroids[j].first;
                const double dy = points[i].y - centroids[j].second;
                const double d = dx * dx + dy * dy;
                if (d < best) { best = d; bi = j; }
            }
            assign[i] = bi;
        }
        double motion = 0;
        for (int j = 0; j < k; ++j) {
            double sx = 0, sy = 0;
            int cnt = 0;
            for (int i = 0; i < n; ++i)
                if (assign[i] == j) { sx += points[i].x; sy += points[i].y; ++cnt; }
            if (cnt == 0) continue;  // empty cluster keeps its centroid
            const double nx = sx / cnt, ny = sy / cnt;
            motion = std::max(motion, std::hypot(nx - centroids[j].first, ny - centroids[j].second));
            centroids[j] = {nx, ny};
        }
        if (motion < 0.5) break;
    }

    // Snap each centroid to the nearest still-unused detected point.
    std::vector<char> used(n, 0);
    std::vector<PixelScore> out;
    out.reserve(k);
    for (int j = 0; j < k; ++j) {
        double best = 1e300;
        int bi = -1;
        for (int i = 0; i < n; ++i) {
            if (used[i]) continue;
            const double dx = points[i].x - centroids[j].first;
            const double dy = points[i].y - centroids[j].second;
            const double d = dx * dx + dy * dy;
            if (d < best) { best = d; bi = i; }
        }
        used[bi] = 1;
        out.push_back(points[bi]);
    }
    return out;
}

SparseDepthMap sample_scanlines(const Tensor& depth_gt, int lines, std::uint64_t jitter_seed,
                                double dropout, double angular_jitter_deg) {
    require(lines >= 1, "sample_scanlines: need at least one line");
    const int h = depth_gt.h, w = depth_gt.w;
    Rng rng(jitter_seed);

    SparseDepthMap sp;
    sp.values = Tensor::hwc(h, w, 1);
    sp.validity = Tensor::hwc(h, w, 1);

    // Lines live in the lower half of the image; when more lines are asked
    // for than fit there, the band grows upward until it covers every row.
    // Each line owns a disjoint row band, so lines never collide and the
    // retained count is exactly lines * width at zero dropout.
    require(lines <= h, "sample_scanlines: more lines than image rows");
    const int band = std::min(h, std::max(h / 2, lines));
    const int band_start = h - band;
    const double spacing = static_cast<double>(band) / lines;
    const double tilt_cap = std::tan(angular_jitter_deg * 3.14159265358979323846 / 180.0);
    for (int li = 0; li < lines; ++li) {
        const int lo = band_start + static_cast<int>(std::floor(li * spacing));
        const int hi = std::min(h - 1, band_start + static_cast<int>(std::floor((li + 1) * spacing)) - 1);
        const double jitter = rng.uniform(-0.3, 0.3) * spacing;
        const double y0 = band_start + (li + 0.5) * spacing + jitter;
        const double tilt = rng.uniform(-tilt_cap, tilt_cap);
        for (int x = 0; x < w; ++x) {
            int y = static_cast<int>(std::lround(y0 + tilt * (x - 0.5 * w)));
            y = std::min(hi, std::max(lo, y));
            if (dropout > 0.0 && rng.uniform() < dropout) continue;
            sp.values.at(y, x, 0) = depth_gt.at(y, x, 0);
            sp.validity.at(y, x, 0) = depth_gt.at(y, x, 0) > 0.0 ? 1.0 : 0.0;
        }
    }
    return sp;
}

SparseDepthMap make_sparse(const Tensor& depth_gt, const Tensor* image,
                           const SamplingStrategy& strategy, std::uint64_t seed) {
    const int h = depth_gt.h, w = depth_gt.w;
    const int total = h * w;
    require(strategy.target_points >= 1 && strategy.target_points <= total,
            "make_sparse: target point count out of range");
    require(strategy.count_jitter >= 0.0 && strategy.count_jitter < 1.0,
            "make_sparse: count_jitter must lie in [0, 1)");
    SamplingStrategy strat = strategy;
    if (strategy.count_jitter > 0.0) {
        Rng jrng(derive_seed(seed, "count-jitter"));
        const double f = 1.0 + strategy.count_jitter * jrng.uniform(-1.0, 1.0);
        strat.target_points = std::max(
            1, std::min(total, static_cast<int>(std::lround(strategy.target_points * f))));
    }
    const SamplingStrategy& strategy_used = strat;

    SparseDepthMap sp;
    sp.values = Tensor::hwc(h, w, 1);
    sp.validity = Tensor::hwc(h, w, 1);
    auto keep = [&](int y, int x) {
        if (depth_gt.at(y, x, 0) <= 0.0) return;
        sp.values.at(y, x, 0) = depth_gt.at(y, x, 0);
        sp.validity.at(y, x, 0) = 1.0;
    };

    switch (strategy_used.kind) {
        case SamplingKind::Uniform: {
            std::vector<int> order(total);
            std::iota(order.begin(), order.end(), 0);
            Rng rng(derive_seed(seed, "uniform-sampling"));
            rng.shuffle(order);
            for (int i = 0; i < strategy_used.target_points; ++i)
                keep(order[i] / w, order[i] % w);
            break;
        }
        case SamplingKind::HarrisKmeans: {
            require(image != nullptr, "make_sparse: harris-kmeans requires an image");
            const Tensor response =
                harris_response(rgb_to_gray(*image), strategy_used.harris_kappa, strategy_used.harris_sigma);
            // 3x3 non-maximum suppression, then the strongest candidates.
            std::vector<PixelScore> cands;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double r = response.at(y, x, 0);
                    if (r <= 0) continue;
                    bool is_max = true;
                    for (int dy = -1; dy <= 1 && is_max; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int yy = y + dy, xx = x + dx;
                            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                            if ((dy || dx) && response.at(yy, xx, 0) > r) { is_max = false; break; }
                        }
                    if (is_max) cands.push_back({x, y, r});
                }
            std::sort(cands.begin(), cands.end(), [](const PixelScore& a, const PixelScore& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.y != b.y ? a.y < b.y : a.x < b.x;
            });
            const std::size_t cap = std::max<std::size_t>(4 * strategy_used.target_points, 512);
            if (cands.size() > cap) cands.resize(cap);
            const std::vector<PixelScore> chosen = kmeans_subsample(
                cands, strategy_used.target_points, derive_seed(seed, "kmeans-sampling"));
            for (const PixelScore& p : chosen) keep(p.y, p.x);
            break;
        }
        case SamplingKind::Scanline: {
            int lines = strategy_used.lines;
            if (lines <= 0) {
                const double per_line = w * (1.0 - strategy_used.dropout);
                lines = std::max(1, std::min(h, static_cast<int>(std::lround(
                                                    strategy_used.target_points / per_line))));
            }
            sp = sample_scanlines(depth_gt, lines, derive_seed(seed, "scanline-sampling"),
                                  strategy_used.dropout, strategy_used.angular_jitter_deg);
            break;
        }
    }
    return sp;
}

}  // namespace sf
