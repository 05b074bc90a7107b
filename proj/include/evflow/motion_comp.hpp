#pragma once

// Event warping along a per-pixel flow and images of warped events (IWEs)
// built by bilinear splatting.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "evflow/event.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

struct WarpedEvents {
  std::vector<double> x, y;   // warped positions (may leave the sensor)
  std::vector<double> t;      // normalized source timestamps
  std::vector<int8_t> p;
  std::vector<int> src;       // source pixel index y * W + x
  double t_ref = 1.0;
  SensorSize sensor;

  std::size_t size() const { return x.size(); }
};

enum class IweKind : uint8_t { avg_timestamp = 0, exp_count = 1, plain_count = 2 };

struct IWE {
  Image pos;
  Image neg;
  IweKind kind = IweKind::plain_count;
};

// x' = x + (t_ref - t) * u(x), with u sampled at the integer source pixel.
// Requires a normalized volume and a finite 2 x H x W flow matching the sensor.
WarpedEvents warp_events(const EventVolume& v, const Tensor& flow, double t_ref);

// One bilinear tap: target pixel, kernel weight and its derivative with
// respect to the warped x and y position.
struct SplatTap {
  int x = 0, y = 0;
  double w = 0.0, dwdx = 0.0, dwdy = 0.0;
};

using SplatTaps = std::array<SplatTap, 9>;

// In-bounds taps of the kernel max(0, 1-|dx|) * max(0, 1-|dy|) at (x, y);
// returns how many of `taps` were filled. At most 4 carry weight; on an
// integer coordinate the derivative is the symmetric one (mean of the left
// and right derivatives), which adds zero-weight neighbour taps.
int bilinear_taps(double x, double y, SensorSize sensor, SplatTaps& taps);

struct PolaritySplat {
  Image pos;
  Image neg;
};

// Accumulates weights[i] * kernel around each warped event, per polarity.
PolaritySplat splat_bilinear(const WarpedEvents& w, std::span<const double> weights);

inline constexpr double kAvgTimestampEps = 1e-9;
inline constexpr double kDefaultSaturation = 0.6;

// Per polarity: sum(k * t) / (sum(k) + eps).
IWE avg_timestamp_iwe(const EventVolume& v, const Tensor& flow, double t_ref);
// Per polarity: exp(-alpha * sum(k)). Throws ConfigError if alpha <= 0.
IWE exp_count_iwe(const EventVolume& v, const Tensor& flow, double t_ref,
                  double alpha = kDefaultSaturation);
IWE plain_count_iwe(const EventVolume& v, const Tensor& flow, double t_ref);

// Debug dump: "IWE1", uint16 H, uint16 W, uint8 kind, then float32 pos plane
// followed by float32 neg plane.
void write_iwe(std::ostream& os, const IWE& iwe);
IWE read_iwe(std::istream& is);

}  // namespace evflow
