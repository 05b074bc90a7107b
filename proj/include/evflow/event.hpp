#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

struct SensorSize {
  int height = 0;
  int width = 0;

  bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  int pixels() const { return height * width; }
  bool operator==(const SensorSize&) const = default;
};

struct Event {
  int x = 0;
  int y = 0;
  double t = 0.0;
  int8_t p = 1;  // +1 or -1

  bool operator==(const Event&) const = default;
};

// Single-channel H x W grid, indexed [row = y][col = x].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  double& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double sum() const;
};

// Events of one fixed interval. Timestamps are seconds until normalize_timestamps
// maps [t_start, t_end] onto [0, 1].
struct EventVolume {
  std::vector<Event> events;
  double t_start = 0.0;
  double t_end = 0.0;
  SensorSize sensor;
  bool normalized = false;

  std::size_t size() const { return events.size(); }
};

struct CountImage {
  Image pos;
  Image neg;

  // 2 x H x W network input (channel 0 positive, channel 1 negative).
  Tensor to_tensor() const;
};

// Checks coordinates and polarity; throws BoundsError on the first violation.
void validate_events(std::span<const Event> events, SensorSize sensor);

// Partitions a time-sorted stream into consecutive volumes
// [t0 + k*interval, t0 + (k+1)*interval), t0 = floor(t_first / interval) * interval.
std::vector<EventVolume> slice_stream(std::span<const Event> events, double interval,
                                      SensorSize sensor);

EventVolume normalize_timestamps(const EventVolume& v);

CountImage count_image(const EventVolume& v);

// Merges `factor` consecutive volumes into one (used for longer evaluation
// intervals). Volumes must share the sensor and be unnormalized.
std::vector<EventVolume> merge_volumes(std::span<const EventVolume> volumes, int factor);

}  // namespace evflow
