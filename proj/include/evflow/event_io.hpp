#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "evflow/event.hpp"

namespace evflow {

// Text format: one event per line, "t x y p", '#' starts a comment.
// Binary format: "EVT1", uint16 H, uint16 W, then packed little-endian
// records (float64 t, uint16 x, uint16 y, int8 p).

struct EventStream {
  SensorSize sensor;
  std::vector<Event> events;
};

void write_events_text(std::ostream& os, const std::vector<Event>& events);
// The text format carries no sensor size; the caller supplies it for validation.
std::vector<Event> read_events_text(std::istream& is, SensorSize sensor);

void write_events_binary(std::ostream& os, const EventStream& stream);
EventStream read_events_binary(std::istream& is);

// Dispatches on extension: ".bin" is binary, anything else text.
void save_events(const std::filesystem::path& path, const EventStream& stream);
EventStream load_events(const std::filesystem::path& path, SensorSize sensor_hint);

}  // namespace evflow
