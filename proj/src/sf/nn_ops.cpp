#include "sf/nn_ops.hpp"

#include <algorithm>
#include <cmath>

#include "sf/common.hpp"

namespace sf {

namespace {

struct ConvDims {
    int kh, kw, cin, cout, pad_y, pad_x, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride) {
    ConvDims d;
    d.kh = w.n;
    d.kw = w.h;
    d.cin = w.w;
    d.cout = w.c;
    require(d.kh % 2 == 1 && d.kw % 2 == 1, "conv2d: kernel must be odd");
    require(x.c == d.cin, "conv2d: input channel mismatch");
    d.pad_y = (d.kh - 1) / 2;
    d.pad_x = (d.kw - 1) / 2;
    d.oh = (x.h + stride - 1) / stride;
    d.ow = (x.w + stride - 1) / stride;
    return d;
}

void conv_forward(const Tensor& x, const Tensor& w, const Tensor* b, int stride,
                  const ConvDims& d, Tensor& out) {
    out = Tensor::hwc(d.oh, d.ow, d.cout);
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            double* op = &out.data[(static_cast<std::size_t>(oy) * d.ow + ox) * d.cout];
            if (b) {
                for (int co = 0; co < d.cout; ++co) op[co] = b->data[co];
            }
            const int base_y = oy * stride - d.pad_y;
            const int base_x = ox * stride - d.pad_x;
            for (int ky = 0; ky < d.kh; ++ky) {
                const int iy = base_y + ky;
                if (iy < 0 || iy >= x.h) continue;
                for (int kx = 0; kx < d.kw; ++kx) {
                    const int ix = base_x + kx;
                    if (ix < 0 || ix >= x.w) continue;
                    const double* ip = &x.data[(static_cast<std::size_t>(iy) * x.w + ix) * d.cin];
                    const double* wp = &w.data[(static_cast<std::size_t>(ky) * d.kw + kx) * d.cin * d.cout];
                    for (int ci = 0; ci < d.cin; ++ci) {
                        const double v = ip[ci];
                        if (v == 0.0) continue;
                        const double* wr = wp + static_cast<std::size_t>(ci) * d.cout;
                        for (int co = 0; co < d.cout; ++co) op[co] += v * wr[co];
                    }
                }
            }
        }
    }
}

void conv_backward(const Tensor& x, const Tensor& w, int stride, const ConvDims& d,
                   const Tensor& gout, Tensor* gx, Tensor* gw, Tensor* gb) {
    if (gb) {
        for (int oy = 0; oy < d.oh; ++oy)
            for (int ox = 0; ox < d.ow; ++ox) {
                const double* gp = &gout.data[(static_cast<std::size_t>(oy) * d.ow + ox) * d.cout];
                for (int co = 0; co < d.cout; ++co) gb->data[co] += gp[co];
            }
    }
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            const double* gp = &gout.data[(static_cast<std::size_t>(oy) * d.ow + ox) * d.cout];
            const int base_y = oy * stride - d.pad_y;
            const int base_x = ox * stride - d.pad_x;
            for (int ky = 0; ky < d.kh; ++ky) {
                const int iy = base_y + ky;
                if (iy < 0 || iy >= x.h) continue;
                for (int kx = 0; kx < d.kw; ++kx) {
                    const int ix = base_x + kx;
                    if (ix < 0 || ix >= x.w) continue;
                    const std::size_t xoff = (static_cast<std::size_t>(iy) * x.w + ix) * d.cin;
                    const std::size_t woff = (static_cast<std::size_t>(ky) * d.kw + kx) * d.cin * d.cout;
                    if (gx) {
                        for (int ci = 0; ci < d.cin; ++ci) {
                            const double* wr = &w.data[woff + static_cast<std::size_t>(ci) * d.cout];
                            double acc = 0.0;
                            for (int co = 0; co < d.cout; ++co) acc += gp[co] * wr[co];
                            gx->data[xoff + ci] += acc;
                        }
                    }
                    if (gw) {
                        for (int ci = 0; ci < d.cin; ++ci) {
                            const double v = x.data[xoff + ci];
                            if (v == 0.0) continue;
                            double* gwr = &gw->data[woff + static_cast<std::size_t>(ci) * d.cout];
                            for (int co = 0; co < d.cout; ++co) gwr[co] += v * gp[co];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

NodePtr conv2d(NodePtr x, NodePtr weight, NodePtr bias, int stride) {
    require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
    const ConvDims d = conv_dims(x->value, weight->value, stride);
    if (bias) require(bias->value.c == d.cout && bias->value.size() == static_cast<std::size_t>(d.cout),
                      "conv2d: bias shape mismatch");
    Tensor out;
    conv_forward(x->value, weight->value, bias ? &bias->value : nullptr, stride, d, out);

    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->inputs = bias ? std::vector<NodePtr>{x, weight, bias} : std::vector<NodePtr>{x, weight};
    n->requires_grad = x->requires_grad || weight->requires_grad || (bias && bias->requires_grad);
    if (n->requires_grad) {
        n->backward = [stride, d](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
            const Tensor& xv = self.inputs[0]->value;
            const Tensor& wv = self.inputs[1]->value;
            Tensor* gb = self.inputs.size() > 2 ? gi[2] : nullptr;
            conv_backward(xv, wv, stride, d, go, gi[0], gi[1], gb);
        };
    }
    return n;
}

NodePtr conv2d_transpose2(NodePtr x, NodePtr weight, NodePtr bias) {
    const Tensor& xv = x->value;
    const Tensor& wv = weight->value;
    require(wv.n % 2 == 1 && wv.h % 2 == 1, "conv2d_transpose2: kernel must be odd");
    require(xv.c == wv.w, "conv2d_transpose2: input channel mismatch");
    const int kh = wv.n, kw = wv.h, cin = wv.w, cout = wv.c;
    const int pad_y = (kh - 1) / 2, pad_x = (kw - 1) / 2;
    const int oh = xv.h * 2, ow = xv.w * 2;

    Tensor out = Tensor::hwc(oh, ow, cout);
    if (bias) {
        require(bias->value.size() == static_cast<std::size_t>(cout), "conv2d_transpose2: bias shape");
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx)
                for (int co = 0; co < cout; ++co) out.at(y, xx, co) = bias->value[co];
    }
    for (int y = 0; y < xv.h; ++y) {
        for (int xx = 0; xx < xv.w; ++xx) {
            const double* ip = &xv.data[(static_cast<std::size_t>(y) * xv.w + xx) * cin];
            for (int ky = 0; ky < kh; ++ky) {
                const int oy = 2 * y + ky - pad_y;
                if (oy < 0 || oy >= oh) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ox = 2 * xx + kx - pad_x;
                    if (ox < 0 || ox >= ow) continue;
                    double* op = &out.data[(static_cast<std::size_t>(oy) * ow + ox) * cout];
                    const double* wp = &wv.data[(static_cast<std::size_t>(ky) * kw + kx) * cin * cout];
                    for (int ci = 0; ci < cin; ++ci) {
                        const double v = ip[ci];
                        if (v == 0.0) continue;
                        const double* wr = wp + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) op[co] += v * wr[co];
                    }
                }
            }
        }
    }

    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->inputs = bias ? std::vector<NodePtr>{x, weight, bias} : std::vector<NodePtr>{x, weight};
    n->requires_grad = x->requires_grad || weight->requires_grad || (bias && bias->requires_grad);
    if (n->requires_grad) {
        n->backward = [kh, kw, cin, cout, pad_y, pad_x, oh, ow](
                          const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
            const Tensor& xv2 = self.inputs[0]->value;
            const Tensor& wv2 = self.inputs[1]->value;
            Tensor* gx = gi[0];
            Tensor* gw = gi[1];
            Tensor* gb = self.inputs.size() > 2 ? gi[2] : nullptr;
            if (gb) {
                for (int y = 0; y < oh; ++y)
                    for (int xx = 0; xx < ow; ++xx)
                        for (int co = 0; co < cout; ++co) gb->data[co] += go.at(y, xx, co);
            }
            for (int y = 0; y < xv2.h; ++y) {
                for (int xx = 0; xx < xv2.w; ++xx) {
                    const std::size_t xoff = (static_cast<std::size_t>(y) * xv2.w + xx) * cin;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int oy = 2 * y + ky - pad_y;
                        if (oy < 0 || oy >= oh) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ox = 2 * xx + kx - pad_x;
                            if (ox < 0 || ox >= ow) continue;
                            const double* gp = &go.data[(static_cast<std::size_t>(oy) * ow + ox) * cout];
                            const std::size_t woff = (static_cast<std::size_t>(ky) * kw + kx) * cin * cout;
                            for (int ci = 0; ci < cin; ++ci) {
                                if (gx) {
                                    const double* wr = &wv2.data[woff + static_cast<std::size_t>(ci) * cout];
                                    double acc = 0.0;
                                    for (int co = 0; co < cout; ++co) acc += gp[co] * wr[co];
                                    gx->data[xoff + ci] += acc;
                                }
                                if (gw) {
                                    const double v = xv2.data[xoff + ci];
                                    if (v == 0.0) continue;
                                    double* gwr = &gw->data[woff + static_cast<std::size_t>(ci) * cout];
                                    for (int co = 0; co < cout; ++co) gwr[co] += v * gp[co];
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return n;
}

NodePtr maxpool_same(NodePtr x, int kernel) {
    require(kernel % 2 == 1 && kernel >= 1, "maxpool_same: kernel must be odd");
    const Tensor& xv = x->value;
    const int r = (kernel - 1) / 2;
    Tensor out = Tensor::hwc(xv.h, xv.w, xv.c);
    // argmax index into x.data, or -1 when the padding value 0 wins.
    auto arg = std::make_shared<std::vector<std::int64_t>>(out.size(), -1);
    for (int y = 0; y < xv.h; ++y) {
        for (int xx = 0; xx < xv.w; ++xx) {
            for (int ch = 0; ch < xv.c; ++ch) {
                double best = 0.0;  // padding value
                std::int64_t best_i = -1;
                for (int dy = -r; dy <= r; ++dy) {
                    const int iy = y + dy;
                    if (iy < 0 || iy >= xv.h) continue;
                    for (int dx = -r; dx <= r; ++dx) {
                        const int ix = xx + dx;
                        if (ix < 0 || ix >= xv.w) continue;
                        const std::size_t i = xv.idx(iy, ix, ch);
                        if (xv.data[i] > best) {
                            best = xv.data[i];
                            best_i = static_cast<std::int64_t>(i);
                        }
                    }
                }
                const std::size_t o = out.idx(y, xx, ch);
                out.data[o] = best;
                (*arg)[o] = best_i;
            }
        }
    }
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->inputs = {x};
    n->requires_grad = x->requires_grad;
    if (n->requires_grad) {
        n->backward = [arg](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            for (std::size_t i = 0; i < go.size(); ++i) {
                const std::int64_t a = (*arg)[i];
                if (a >= 0) gi[0]->data[static_cast<std::size_t>(a)] += go[i];
            }
        };
    }
    return n;
}

NodePtr avgpool3_same(NodePtr x) {
    const Tensor& xv = x->value;
    Tensor out = Tensor::hwc(xv.h, xv.w, xv.c);
    for (int y = 0; y < xv.h; ++y) {
        for (int xx = 0; xx < xv.w; ++xx) {
            int cnt = 0;
            for (int ch = 0; ch < xv.c; ++ch) out.at(y, xx, ch) = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                const int iy = y + dy;
                if (iy < 0 || iy >= xv.h) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ix = xx + dx;
                    if (ix < 0 || ix >= xv.w) continue;
                    ++cnt;
                    for (int ch = 0; ch < xv.c; ++ch) out.at(y, xx, ch) += xv.at(iy, ix, ch);
                }
            }
            const double inv = 1.0 / cnt;
            for (int ch = 0; ch < xv.c; ++ch) out.at(y, xx, ch) *= inv;
        }
    }
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->inputs = {x};
    n->requires_grad = x->requires_grad;
    if (n->requires_grad) {
        n->backward = [](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            const Tensor& xv2 = self.inputs[0]->value;
            for (int y = 0; y < go.h; ++y) {
                for (int xx = 0; xx < go.w; ++xx) {
                    int cnt = 0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int iy = y + dy, ix = xx + dx;
                            if (iy >= 0 && iy < xv2.h && ix >= 0 && ix < xv2.w) ++cnt;
                        }
                    const double inv = 1.0 / cnt;
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int iy = y + dy;
                        if (iy < 0 || iy >= xv2.h) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int ix = xx + dx;
                            if (ix < 0 || ix >= xv2.w) continue;
                            for (int ch = 0; ch < go.c; ++ch)
                                gi[0]->at(iy, ix, ch) += go.at(y, xx, ch) * inv;
                        }
                    }
                }
            }
        };
    }
    return n;
}

NodePtr nn_upsample2(NodePtr x) {
    const Tensor& xv = x->value;
    Tensor out = Tensor::hwc(xv.h * 2, xv.w * 2, xv.c);
    for (int y = 0; y < out.h; ++y)
        for (int xx = 0; xx < out.w; ++xx)
            for (int ch = 0; ch < out.c; ++ch) out.at(y, xx, ch) = xv.at(y / 2, xx / 2, ch);
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->inputs = {std::move(x)};
    n->requires_grad = n->inputs[0]->requires_grad;
    if (n->requires_grad) {
        n->backward = [](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            for (int y = 0; y < go.h; ++y)
                for (int xx = 0; xx < go.w; ++xx)
                    for (int ch = 0; ch < go.c; ++ch)
                        gi[0]->at(y / 2, xx / 2, ch) += go.at(y, xx, ch);
        };
    }
    return n;
}

NodePtr global_mean(NodePtr x) {
    const Tensor& xv = x->value;
    Tensor out = Tensor::vec(xv.c);
    const double inv = 1.0 / (static_cast<double>(xv.h) * xv.w);
    for (int y = 0; y < xv.h; ++y)
        for (int xx = 0; xx < xv.w; ++xx)
            for (int ch = 0; ch < xv.c; ++ch) out[ch] += xv.at(y, xx, ch) * inv;
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->inputs = {std::move(x)};
    n->requires_grad = n->inputs[0]->requires_grad;
    if (n->requires_grad) {
        n->backward = [inv](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
            if (!gi[0]) return;
            const Tensor& xv2 = self.inputs[0]->value;
            for (int y = 0; y < xv2.h; ++y)
                for (int xx = 0; xx < xv2.w; ++xx)
                    for (int ch = 0; ch < xv2.c; ++ch) gi[0]->at(y, xx, ch) += go[ch] * inv;
        };
    }
    return n;
}

void bilinear_sample(const Tensor& image, const Tensor& coords, Tensor& values, Tensor& mask) {
    require(coords.c == 2, "bilinear_sample: coords must have 2 channels");
    const int H = image.h, W = image.w, C = image.c;
    values = Tensor::hwc(coords.h, coords.w, C);
    mask = Tensor::hwc(coords.h, coords.w, 1);
    for (int y = 0; y < coords.h; ++y) {
        for (int x = 0; x < coords.w; ++x) {
            double u = coords.at(y, x, 0);
            double v = coords.at(y, x, 1);
            if (!(std::isfinite(u) && std::isfinite(v))) continue;
            const bool inside = u >= -kBorderTol && u <= W - 1 + kBorderTol &&
                                v >= -kBorderTol && v <= H - 1 + kBorderTol;
            if (!inside) continue;
            u = std::min(std::max(u, 0.0), static_cast<double>(W - 1));
            v = std::min(std::max(v, 0.0), static_cast<double>(H - 1));
            const int x0 = static_cast<int>(std::floor(u));
            const int y0 = static_cast<int>(std::floor(v));
            const int x1 = std::min(x0 + 1, W - 1);
            const int y1 = std::min(y0 + 1, H - 1);
            const double fx = u - x0;
            const double fy = v - y0;
            const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
            const double w10 = (1 - fx) * fy, w11 = fx * fy;
            for (int ch = 0; ch < C; ++ch) {
                values.at(y, x, ch) = w00 * image.at(y0, x0, ch) + w01 * image.at(y0, x1, ch) +
                                      w10 * image.at(y1, x0, ch) + w11 * image.at(y1, x1, ch);
            }
            mask.at(y, x, 0) = 1.0;
        }
    }
}

SampleResult bilinear_sample_node(NodePtr image, NodePtr coords) {
    Tensor values, mask;
    bilinear_sample(image->value, coords->value, values, mask);
    auto mask_copy = std::make_shared<Tensor>(mask);

    auto n = std::make_shared<Node>();
    n->value = std::move(values);
    n->inputs = {image, coords};
    n->requires_grad = image->requires_grad || coords->requires_grad;
    if (n->requires_grad) {
        n->backward = [mask_copy](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
            const Tensor& img = self.inputs[0]->value;
            const Tensor& crd = self.inputs[1]->value;
            const int H = img.h, W = img.w, C = img.c;
            for (int y = 0; y < crd.h; ++y) {
                for (int x = 0; x < crd.w; ++x) {
                    if (mask_copy->at(y, x, 0) == 0.0) continue;
                    double u = crd.at(y, x, 0);
                    double v = crd.at(y, x, 1);
                    u = std::min(std::max(u, 0.0), static_cast<double>(W - 1));
                    v = std::min(std::max(v, 0.0), static_cast<double>(H - 1));
                    const int x0 = static_cast<int>(std::floor(u));
                    const int y0 = static_cast<int>(std::floor(v));
                    const int x1 = std::min(x0 + 1, W - 1);
                    const int y1 = std::min(y0 + 1, H - 1);
                    const double fx = u - x0;
                    const double fy = v - y0;
                    for (int ch = 0; ch < C; ++ch) {
                        const double g = go.at(y, x, ch);
                        if (g == 0.0) continue;
                        const double i00 = img.at(y0, x0, ch), i01 = img.at(y0, x1, ch);
                        const double i10 = img.at(y1, x0, ch), i11 = img.at(y1, x1, ch);
                        if (gi[0]) {
                            gi[0]->at(y0, x0, ch) += g * (1 - fx) * (1 - fy);
                            gi[0]->at(y0, x1, ch) += g * fx * (1 - fy);
                            gi[0]->at(y1, x0, ch) += g * (1 - fx) * fy;
                            gi[0]->at(y1, x1, ch) += g * fx * fy;
                        }
                        if (gi[1]) {
                            const double du = (1 - fy) * (i01 - i00) + fy * (i11 - i10);
                            const double dv = (1 - fx) * (i10 - i00) + fx * (i11 - i01);
                            gi[1]->at(y, x, 0) += g * du;
                            gi[1]->at(y, x, 1) += g * dv;
                        }
                    }
                }
            }
        };
    }
    SampleResult r;
    r.values = n;
    r.mask = std::move(mask);
    return r;
}

}  // namespace sf
