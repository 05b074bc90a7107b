#include "evflow/viz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "evflow/errors.hpp"

namespace evflow {

namespace {

std::array<uint8_t, 3> hsv_to_rgb(double hue_deg, double value) {
  const double c = value;
  const double hp = hue_deg / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  auto q = [](double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  return {q(r), q(g), q(b)};
}

}  // namespace

double flow_hue(double u, double v) {
  double deg = std::atan2(v, u) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  return deg >= 360.0 ? 0.0 : deg;
}

RgbImage flow_to_rgb(const Tensor& flow, double eps) {
  if (flow.ndim() != 3 || flow.channels() != 2) throw ShapeError("flow_to_rgb: expected a 2 x H x W flow");
  if (!flow.all_finite()) throw NumericalError("flow_to_rgb: flow contains non-finite values");
  const int h = flow.height();
  const int w = flow.width();
  double max_mag = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) max_mag = std::max(max_mag, std::hypot(flow.at(0, y, x), flow.at(1, y, x)));
  }
  const double denom = std::max(max_mag, eps);
  RgbImage img{h, w, std::vector<uint8_t>(static_cast<std::size_t>(h) * w * 3, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = flow.at(0, y, x);
      const double v = flow.at(1, y, x);
      const auto rgb = hsv_to_rgb(flow_hue(u, v), std::hypot(u, v) / denom);
      std::copy(rgb.begin(), rgb.end(), img.data.begin() + 3 * (static_cast<std::ptrdiff_t>(y) * w + x));
    }
  }
  return img;
}

void write_flow_png(const std::filesystem::path& path, const Tensor& flow) {
  const RgbImage img = flow_to_rgb(flow);
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto p = img.pixel(y, x);
      bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace evflow
