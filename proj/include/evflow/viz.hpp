#pragma once

// Colour-wheel flow rendering: hue = atan2(v, u), full saturation and
// value = |u| / max(max |u|, eps) over the image.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // row-major RGB triplets

  std::array<uint8_t, 3> pixel(int y, int x) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {data[i], data[i + 1], data[i + 2]};
  }
};

// Hue in degrees [0, 360) of a flow vector.
double flow_hue(double u, double v);

RgbImage flow_to_rgb(const Tensor& flow, double eps = 1e-9);

// Throws NumericalError on non-finite flow and IoError when the PNG cannot be written.
void write_flow_png(const std::filesystem::path& path, const Tensor& flow);

}  // namespace evflow
