#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sf/tensor.hpp"

namespace sf {

// 8-bit RGB image; values clamped from [0,1].
void write_png_rgb8(const std::string& path, const Tensor& image);
Tensor read_png_rgb8(const std::string& path);

// 16-bit grayscale.
void write_png_gray16(const std::string& path, int width, int height,
                      const std::vector<std::uint16_t>& samples);
std::vector<std::uint16_t> read_png_gray16(const std::string& path, int& width, int& height);

// Depth maps as 16-bit millimeter PNGs; 0 marks an invalid pixel. Values
// above 65.535 m saturate at 65535 mm.
void write_depth_png(const std::string& path, const Tensor& depth_m, const Tensor* validity);
void read_depth_png(const std::string& path, Tensor& depth_m, Tensor& validity);

}  // namespace sf
