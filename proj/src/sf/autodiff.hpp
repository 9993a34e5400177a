#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sf/tensor.hpp"

namespace sf {

// Reverse-mode autodiff over whole tensors. Graphs are built per forward pass
// and discarded after backward; trainable leaves persist across passes.
struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    std::vector<NodePtr> inputs;
    // Accumulates input gradients given the output gradient. grad_in is
    // aligned with inputs; entries are null for inputs without grad.
    std::function<void(const Node&, const Tensor&, const std::vector<Tensor*>&)> backward;
    bool requires_grad = false;
};

NodePtr make_leaf(Tensor value, bool requires_grad);
inline NodePtr make_const(Tensor value) { return make_leaf(std::move(value), false); }

// Gradients of one backward pass, keyed by node identity.
class Gradients {
public:
    Tensor& slot(const Node* n, const Tensor& like);
    const Tensor* find(const Node* n) const;
    const Tensor* find(const NodePtr& n) const { return find(n.get()); }

private:
    std::unordered_map<const Node*, Tensor> grads_;
};

// Runs reverse-mode accumulation from a scalar root (seed gradient 1).
Gradients backward(const NodePtr& root);

// ---- elementwise ops ----
NodePtr add(NodePtr a, NodePtr b);
NodePtr sub(NodePtr a, NodePtr b);
NodePtr mul(NodePtr a, NodePtr b);
NodePtr divide(NodePtr a, NodePtr b);
NodePtr add_scalar(NodePtr a, double s);
NodePtr mul_scalar(NodePtr a, double s);
NodePtr mul_const(NodePtr a, Tensor m);    // elementwise by a constant tensor
NodePtr abs_node(NodePtr a);               // subgradient 0 at 0
NodePtr exp_node(NodePtr a);
NodePtr softplus(NodePtr a);
NodePtr leaky_relu(NodePtr a, double slope);
// Clamp with a small gradient leak outside the range, so saturated values
// stay recoverable during optimization.
NodePtr clamp_node(NodePtr a, double lo, double hi, double leak = 0.05);
NodePtr square(NodePtr a);

// ---- shape ops ----
NodePtr concat_c(const std::vector<NodePtr>& parts);
NodePtr slice_c(NodePtr a, int first, int count);
NodePtr mean_c(NodePtr a);  // channel mean -> (h,w,1)

// ---- reductions ----
NodePtr sum_all(NodePtr a);                     // -> scalar node
NodePtr mean_all(NodePtr a);
NodePtr masked_sum(NodePtr a, Tensor mask);     // sum of a*mask, mask constant

inline double scalar_of(const NodePtr& n) { return n->value[0]; }

}  // namespace sf
