#include "sf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "sf/common.hpp"

namespace sf {

NodePtr make_leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

Tensor& Gradients::slot(const Node* n, const Tensor& like) {
    auto it = grads_.find(n);
    if (it == grads_.end()) it = grads_.emplace(n, like.zeros_like()).first;
    return it->second;
}

const Tensor* Gradients::find(const Node* n) const {
    auto it = grads_.find(n);
    return it == grads_.end() ? nullptr : &it->second;
}

namespace {

// Iterative post-order topological sort; creation order of inputs fixes the
// visit order, so accumulation is deterministic.
std::vector<const Node*> topo_order(const Node* root) {
    std::vector<const Node*> order;
    std::unordered_set<const Node*> seen;
    struct Item { const Node* node; std::size_t next_child; };
    std::vector<Item> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        Item& top = stack.back();
        if (top.next_child < top.node->inputs.size()) {
            const Node* child = top.node->inputs[top.next_child++].get();
            if (child->requires_grad && !seen.count(child)) {
                seen.insert(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(top.node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

Gradients backward(const NodePtr& root) {
    require(root != nullptr, "backward: null root");
    require(root->value.size() == 1, "backward: root must be scalar");
    Gradients g;
    if (!root->requires_grad) return g;
    g.slot(root.get(), root->value)[0] = 1.0;

    std::vector<const Node*> order = topo_order(root.get());
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Node* node = *it;
        if (!node->backward) continue;
        const Tensor* gout = g.find(node);
        if (!gout) continue;
        std::vector<Tensor*> gin(node->inputs.size(), nullptr);
        for (std::size_t i = 0; i < node->inputs.size(); ++i) {
            const Node* in = node->inputs[i].get();
            if (in->requires_grad) gin[i] = &g.slot(in, in->value);
        }
        node->backward(*node, *gout, gin);
    }
    return g;
}

namespace {

NodePtr unary(NodePtr a, Tensor value,
              std::function<void(const Node&, const Tensor&, const std::vector<Tensor*>&)> back) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = a->requires_grad;
    n->inputs = {std::move(a)};
    if (n->requires_grad) n->backward = std::move(back);
    return n;
}

NodePtr binary(NodePtr a, NodePtr b, Tensor value,
               std::function<void(const Node&, const Tensor&, const std::vector<Tensor*>&)> back) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = a->requires_grad || b->requires_grad;
    n->inputs = {std::move(a), std::move(b)};
    if (n->requires_grad) n->backward = std::move(back);
    return n;
}

}  // namespace

NodePtr add(NodePtr a, NodePtr b) {
    require(a->value.same_shape(b->value), "add: shape mismatch");
    Tensor v = a->value + b->value;
    return binary(std::move(a), std::move(b), std::move(v),
                  [](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                      for (int k = 0; k < 2; ++k)
                          if (gi[k])
                              for (std::size_t i = 0; i < go.size(); ++i) (*gi[k])[i] += go[i];
                  });
}

NodePtr sub(NodePtr a, NodePtr b) {
    require(a->value.same_shape(b->value), "sub: shape mismatch");
    Tensor v = a->value - b->value;
    return binary(std::move(a), std::move(b), std::move(v),
                  [](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                      if (gi[0])
                          for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i];
                      if (gi[1])
                          for (std::size_t i = 0; i < go.size(); ++i) (*gi[1])[i] -= go[i];
                  });
}

NodePtr mul(NodePtr a, NodePtr b) {
    require(a->value.same_shape(b->value), "mul: shape mismatch");
    Tensor v = a->value * b->value;
    return binary(std::move(a), std::move(b), std::move(v),
                  [](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                      const Tensor& av = self.inputs[0]->value;
                      const Tensor& bv = self.inputs[1]->value;
                      if (gi[0])
                          for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * bv[i];
                      if (gi[1])
                          for (std::size_t i = 0; i < go.size(); ++i) (*gi[1])[i] += go[i] * av[i];
                  });
}

NodePtr divide(NodePtr a, NodePtr b) {
    require(a->value.same_shape(b->value), "divide: shape mismatch");
    Tensor v = a->value;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] /= b->value[i];
    return binary(std::move(a), std::move(b), std::move(v),
                  [](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                      const Tensor& av = self.inputs[0]->value;
                      const Tensor& bv = self.inputs[1]->value;
                      if (gi[0])
                          for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] / bv[i];
                      if (gi[1])
                          for (std::size_t i = 0; i < go.size(); ++i)
                              (*gi[1])[i] -= go[i] * av[i] / (bv[i] * bv[i]);
                  });
}

NodePtr add_scalar(NodePtr a, double s) {
    Tensor v = a->value;
    for (double& x : v.data) x += s;
    return unary(std::move(a), std::move(v),
                 [](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (gi[0])
                         for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i];
                 });
}

NodePtr mul_scalar(NodePtr a, double s) {
    Tensor v = a->value * s;
    return unary(std::move(a), std::move(v),
                 [s](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (gi[0])
                         for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * s;
                 });
}

NodePtr mul_const(NodePtr a, Tensor m) {
    require(a->value.same_shape(m), "mul_const: shape mismatch");
    Tensor v = a->value * m;
    auto mask = std::make_shared<Tensor>(std::move(m));
    return unary(std::move(a), std::move(v),
                 [mask](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (gi[0])
                         for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * (*mask)[i];
                 });
}

NodePtr abs_node(NodePtr a) {
    Tensor v = a->value;
    for (double& x : v.data) x = std::fabs(x);
    return unary(std::move(a), std::move(v),
                 [](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     const Tensor& av = self.inputs[0]->value;
                     for (std::size_t i = 0; i < go.size(); ++i) {
                         double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
                         (*gi[0])[i] += go[i] * s;
                     }
                 });
}

NodePtr exp_node(NodePtr a) {
    Tensor v = a->value;
    for (double& x : v.data) x = std::exp(x);
    auto vv = std::make_shared<Tensor>(v);
    return unary(std::move(a), std::move(v),
                 [vv](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * (*vv)[i];
                 });
}

NodePtr softplus(NodePtr a) {
    Tensor v = a->value;
    for (double& x : v.data) x = x > 30.0 ? x : std::log1p(std::exp(x));
    return unary(std::move(a), std::move(v),
                 [](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     const Tensor& av = self.inputs[0]->value;
                     for (std::size_t i = 0; i < go.size(); ++i) {
                         double x = av[i];
                         double sig = x > 30.0 ? 1.0 : (x < -30.0 ? std::exp(x) : 1.0 / (1.0 + std::exp(-x)));
                         (*gi[0])[i] += go[i] * sig;
                     }
                 });
}

NodePtr leaky_relu(NodePtr a, double slope) {
    Tensor v = a->value;
    for (double& x : v.data) x = x >= 0.0 ? x : slope * x;
    return unary(std::move(a), std::move(v),
                 [slope](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     const Tensor& av = self.inputs[0]->value;
                     for (std::size_t i = 0; i < go.size(); ++i)
                         (*gi[0])[i] += go[i] * (av[i] >= 0.0 ? 1.0 : slope);
                 });
}

NodePtr clamp_node(NodePtr a, double lo, double hi, double leak) {
    Tensor v = a->value;
    for (double& x : v.data) x = std::min(hi, std::max(lo, x));
    return unary(std::move(a), std::move(v),
                 [lo, hi, leak](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     const Tensor& av = self.inputs[0]->value;
                     for (std::size_t i = 0; i < go.size(); ++i)
                         (*gi[0])[i] += go[i] * (av[i] > lo && av[i] < hi ? 1.0 : leak);
                 });
}

NodePtr square(NodePtr a) {
    Tensor v = a->value;
    for (double& x : v.data) x = x * x;
    return unary(std::move(a), std::move(v),
                 [](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     const Tensor& av = self.inputs[0]->value;
                     for (std::size_t i = 0; i < go.size(); ++i) (*gi[0])[i] += go[i] * 2.0 * av[i];
                 });
}

NodePtr concat_c(const std::vector<NodePtr>& parts) {
    require(!parts.empty(), "concat_c: empty input list");
    int h = parts[0]->value.h, w = parts[0]->value.w;
    int ctot = 0;
    bool grad = false;
    for (const auto& p : parts) {
        require(p->value.n == 1 && p->value.h == h && p->value.w == w,
                "concat_c: spatial shape mismatch");
        ctot += p->value.c;
        grad = grad || p->requires_grad;
    }
    Tensor v = Tensor::hwc(h, w, ctot);
    int off = 0;
    for (const auto& p : parts) {
        const Tensor& pv = p->value;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < pv.c; ++ch) v.at(y, x, off + ch) = pv.at(y, x, ch);
        off += pv.c;
    }
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->inputs = parts;
    n->requires_grad = grad;
    if (grad)
        n->backward = [](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
            int off2 = 0;
            for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                const Tensor& pv = self.inputs[k]->value;
                if (gi[k]) {
                    for (int y = 0; y < go.h; ++y)
                        for (int x = 0; x < go.w; ++x)
                            for (int ch = 0; ch < pv.c; ++ch)
                                gi[k]->at(y, x, ch) += go.at(y, x, off2 + ch);
                }
                off2 += pv.c;
            }
        };
    return n;
}

NodePtr slice_c(NodePtr a, int first, int count) {
    const Tensor& av = a->value;
    require(first >= 0 && count > 0 && first + count <= av.c, "slice_c: bad channel range");
    Tensor v = Tensor::hwc(av.h, av.w, count);
    for (int y = 0; y < av.h; ++y)
        for (int x = 0; x < av.w; ++x)
            for (int ch = 0; ch < count; ++ch) v.at(y, x, ch) = av.at(y, x, first + ch);
    return unary(std::move(a), std::move(v),
                 [first, count](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     for (int y = 0; y < go.h; ++y)
                         for (int x = 0; x < go.w; ++x)
                             for (int ch = 0; ch < count; ++ch)
                                 gi[0]->at(y, x, first + ch) += go.at(y, x, ch);
                 });
}

NodePtr mean_c(NodePtr a) {
    const Tensor& av = a->value;
    Tensor v = Tensor::hwc(av.h, av.w, 1);
    const double inv = 1.0 / av.c;
    for (int y = 0; y < av.h; ++y)
        for (int x = 0; x < av.w; ++x) {
            double s = 0.0;
            for (int ch = 0; ch < av.c; ++ch) s += av.at(y, x, ch);
            v.at(y, x, 0) = s * inv;
        }
    return unary(std::move(a), std::move(v),
                 [inv](const Node& self, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     const Tensor& av2 = self.inputs[0]->value;
                     for (int y = 0; y < go.h; ++y)
                         for (int x = 0; x < go.w; ++x) {
                             double g = go.at(y, x, 0) * inv;
                             for (int ch = 0; ch < av2.c; ++ch) gi[0]->at(y, x, ch) += g;
                         }
                 });
}

NodePtr sum_all(NodePtr a) {
    Tensor v = Tensor::scalar(a->value.sum());
    return unary(std::move(a), std::move(v),
                 [](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     for (std::size_t i = 0; i < gi[0]->size(); ++i) (*gi[0])[i] += go[0];
                 });
}

NodePtr mean_all(NodePtr a) {
    double inv = a->value.size() ? 1.0 / static_cast<double>(a->value.size()) : 0.0;
    return mul_scalar(sum_all(std::move(a)), inv);
}

NodePtr masked_sum(NodePtr a, Tensor mask) {
    require(a->value.same_shape(mask), "masked_sum: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) s += a->value[i] * mask[i];
    auto m = std::make_shared<Tensor>(std::move(mask));
    Tensor v = Tensor::scalar(s);
    return unary(std::move(a), std::move(v),
                 [m](const Node&, const Tensor& go, const std::vector<Tensor*>& gi) {
                     if (!gi[0]) return;
                     for (std::size_t i = 0; i < gi[0]->size(); ++i) (*gi[0])[i] += go[0] * (*m)[i];
                 });
}

}  // namespace sf
