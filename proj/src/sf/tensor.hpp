#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace sf {

// Dense double tensor. Images and feature maps are (h, w, c) with the channel
// index fastest; convolution weights use all four dims as (kh, kw, cin, cout).
class Tensor {
public:
    Tensor() = default;

    static Tensor hwc(int h, int w, int c, double fill = 0.0) {
        Tensor t;
        t.n = 1; t.h = h; t.w = w; t.c = c;
        t.data.assign(static_cast<std::size_t>(h) * w * c, fill);
        return t;
    }
    static Tensor conv_weight(int kh, int kw, int cin, int cout) {
        Tensor t;
        t.n = kh; t.h = kw; t.w = cin; t.c = cout;
        t.data.assign(static_cast<std::size_t>(kh) * kw * cin * cout, 0.0);
        return t;
    }
    static Tensor vec(int len, double fill = 0.0) { return hwc(1, 1, len, fill); }
    static Tensor scalar(double v) { return hwc(1, 1, 1, v); }

    int n = 0, h = 0, w = 0, c = 0;
    std::vector<double> data;

    bool empty() const { return data.empty(); }
    std::size_t size() const { return data.size(); }

    bool same_shape(const Tensor& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }

    std::size_t idx(int y, int x, int ch) const {
        assert(n == 1 && y >= 0 && y < h && x >= 0 && x < w && ch >= 0 && ch < c);
        return (static_cast<std::size_t>(y) * w + x) * c + ch;
    }
    double& at(int y, int x, int ch) { return data[idx(y, x, ch)]; }
    double at(int y, int x, int ch) const { return data[idx(y, x, ch)]; }

    // Conv-weight accessor: (ky, kx, cin, cout).
    double& wt(int ky, int kx, int ci, int co) {
        return data[((static_cast<std::size_t>(ky) * h + kx) * w + ci) * c + co];
    }
    double wt(int ky, int kx, int ci, int co) const {
        return data[((static_cast<std::size_t>(ky) * h + kx) * w + ci) * c + co];
    }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    Tensor zeros_like() const {
        Tensor t;
        t.n = n; t.h = h; t.w = w; t.c = c;
        t.data.assign(data.size(), 0.0);
        return t;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    double sum() const;
    double mean() const { return data.empty() ? 0.0 : sum() / static_cast<double>(data.size()); }
    double max_abs() const;
};

// Elementwise helpers on raw tensors (no autodiff).
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);

}  // namespace sf
