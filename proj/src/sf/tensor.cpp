#include "sf/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "sf/common.hpp"

namespace sf {

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::fabs(v));
    return m;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "tensor add: shape mismatch");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "tensor sub: shape mismatch");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

Tensor operator*(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "tensor mul: shape mismatch");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= b[i];
    return r;
}

Tensor operator*(const Tensor& a, double s) {
    Tensor r = a;
    for (double& v : r.data) v *= s;
    return r;
}

}  // namespace sf
