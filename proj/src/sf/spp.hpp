#pragma once

#include <vector>

#include "sf/nn_ops.hpp"

namespace sf {

struct SppConfig {
    std::vector<int> kernel_sizes{5, 7, 9, 11, 13};
    int conv_channels = 32;  // output channels of the three stacked 1x1 layers

    void validate() const;  // odd, >= 3, strictly increasing
};

// Stride-1 max pools of both channels at every kernel size, concatenated
// after the raw input. Zero padding keeps absent measurements from winning.
NodePtr pool_pyramid(NodePtr input, const std::vector<int>& kernel_sizes);

// Three stacked 1x1 convolutions (leaky ReLU between) re-weighting the
// pyramid levels; purely pointwise.
struct SppWeights {
    NodePtr w1, b1, w2, b2, w3, b3;
};
NodePtr spp_fuse(NodePtr pyramid, const SppWeights& weights, double leaky_slope = 0.1);

}  // namespace sf
