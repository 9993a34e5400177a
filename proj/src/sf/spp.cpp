#include "sf/spp.hpp"

#include "sf/common.hpp"

namespace sf {

void SppConfig::validate() const {
    int prev = 1;
    for (int k : kernel_sizes) {
        require(k % 2 == 1 && k >= 3, "spp: kernel sizes must be odd and >= 3");
        require(k > prev, "spp: kernel sizes must be strictly increasing");
        prev = k;
    }
    require(conv_channels > 0, "spp: conv channels must be positive");
}

NodePtr pool_pyramid(NodePtr input, const std::vector<int>& kernel_sizes) {
    require(input->value.c == 2, "pool_pyramid: expected 2-channel sparse input");
    if (kernel_sizes.empty()) return input;
    std::vector<NodePtr> levels;
    levels.reserve(kernel_sizes.size() + 1);
    levels.push_back(input);
    for (int k : kernel_sizes) levels.push_back(maxpool_same(input, k));
    return concat_c(levels);
}

NodePtr spp_fuse(NodePtr pyramid, const SppWeights& weights, double leaky_slope) {
    NodePtr x = conv2d(std::move(pyramid), weights.w1, weights.b1, 1);
    x = leaky_relu(std::move(x), leaky_slope);
    x = conv2d(std::move(x), weights.w2, weights.b2, 1);
    x = leaky_relu(std::move(x), leaky_slope);
    x = conv2d(std::move(x), weights.w3, weights.b3, 1);
    x = leaky_relu(std::move(x), leaky_slope);
    return x;
}

}  // namespace sf
