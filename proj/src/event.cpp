#include "evflow/event.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evflow/errors.hpp"

namespace evflow {

namespace {

// Slice index of t; timestamps within 1e-9 (relative) below a boundary snap onto it
// so that e.g. t = 0.3 lands in [0.3, 0.4) despite 0.3 / 0.1 < 3 in binary.
long slice_index(double t, double interval) {
  return static_cast<long>(std::floor(t / interval + 1e-9));
}

}  // namespace

double Image::sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }

Tensor CountImage::to_tensor() const {
  Tensor t({2, pos.height, pos.width});
  std::copy(pos.data.begin(), pos.data.end(), t.data());
  std::copy(neg.data.begin(), neg.data.end(), t.data() + pos.data.size());
  return t;
}

void validate_events(std::span<const Event> events, SensorSize sensor) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (!sensor.contains(e.x, e.y)) {
      throw BoundsError("event " + std::to_string(i) + " at (" + std::to_string(e.x) + ", " +
                        std::to_string(e.y) + ") outside sensor " + std::to_string(sensor.height) +
                        "x" + std::to_string(sensor.width));
    }
    if (e.p != 1 && e.p != -1) {
      throw BoundsError("event " + std::to_string(i) + " has polarity " + std::to_string(e.p));
    }
  }
}

std::vector<EventVolume> slice_stream(std::span<const Event> events, double interval,
                                      SensorSize sensor) {
  if (!(interval > 0.0)) throw ConfigError("slice_stream: interval must be positive");
  std::vector<EventVolume> out;
  if (events.empty()) return out;
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t < events[i - 1].t) {
      throw OrderingError("slice_stream: events not sorted by time at index " + std::to_string(i) +
                          " (" + std::to_string(events[i].t) + " < " +
                          std::to_string(events[i - 1].t) + ")");
    }
  }
  const long first = slice_index(events.front().t, interval);
  const long last = slice_index(events.back().t, interval);
  out.resize(static_cast<std::size_t>(last - first + 1));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].t_start = static_cast<double>(first + static_cast<long>(k)) * interval;
    out[k].t_end = static_cast<double>(first + static_cast<long>(k) + 1) * interval;
    out[k].sensor = sensor;
  }
  for (const Event& e : events) {
    out[static_cast<std::size_t>(slice_index(e.t, interval) - first)].events.push_back(e);
  }
  return out;
}

EventVolume normalize_timestamps(const EventVolume& v) {
  if (v.normalized) return v;
  const double span = v.t_end - v.t_start;
  if (!(span > 0.0)) {
    throw DegenerateIntervalError("normalize_timestamps: t_end must exceed t_start");
  }
  EventVolume out = v;
  // Clamping absorbs the boundary snapping of slice_index.
  for (Event& e : out.events) e.t = std::clamp((e.t - v.t_start) / span, 0.0, 1.0);
  out.normalized = true;
  return out;
}

CountImage count_image(const EventVolume& v) {
  CountImage ci{Image(v.sensor.height, v.sensor.width), Image(v.sensor.height, v.sensor.width)};
  for (const Event& e : v.events) {
    if (!v.sensor.contains(e.x, e.y)) {
      throw BoundsError("count_image: event outside sensor at (" + std::to_string(e.x) + ", " +
                        std::to_string(e.y) + ")");
    }
    if (e.p > 0) {
      ci.pos(e.y, e.x) += 1.0;
    } else {
      ci.neg(e.y, e.x) += 1.0;
    }
  }
  return ci;
}

std::vector<EventVolume> merge_volumes(std::span<const EventVolume> volumes, int factor) {
  if (factor < 1) throw ConfigError("merge_volumes: factor must be >= 1");
  std::vector<EventVolume> out;
  for (std::size_t k = 0; k + static_cast<std::size_t>(factor) <= volumes.size(); k += factor) {
    EventVolume merged;
    merged.sensor = volumes[k].sensor;
    merged.t_start = volumes[k].t_start;
    merged.t_end = volumes[k + factor - 1].t_end;
    for (int j = 0; j < factor; ++j) {
      const EventVolume& v = volumes[k + j];
      if (v.normalized) throw ConfigError("merge_volumes: volumes must not be normalized");
      if (!(v.sensor == merged.sensor)) throw ShapeError("merge_volumes: sensor size mismatch");
      merged.events.insert(merged.events.end(), v.events.begin(), v.events.end());
    }
    out.push_back(std::move(merged));
  }
  return out;
}

}  // namespace evflow
