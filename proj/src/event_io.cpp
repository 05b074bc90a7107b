#include "evflow/event_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "binio.hpp"
#include "evflow/errors.hpp"

namespace evflow {

void write_events_text(std::ostream& os, const std::vector<Event>& events) {
  os << "# t x y p\n";
  char buf[64];
  for (const Event& e : events) {
    auto res = std::to_chars(buf, buf + sizeof(buf), e.t);
    os.write(buf, res.ptr - buf);
    os << ' ' << e.x << ' ' << e.y << ' ' << static_cast<int>(e.p) << '\n';
  }
}

std::vector<Event> read_events_text(std::istream& is, SensorSize sensor) {
  std::vector<Event> events;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    Event e;
    int p = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), e.t);
    if (res.ec != std::errc() || !(ls >> e.x >> e.y >> p)) {
      throw IoError("event text line " + std::to_string(lineno) + ": expected 't x y p'");
    }
    if (p != 1 && p != -1) {
      throw IoError("event text line " + std::to_string(lineno) + ": polarity must be 1 or -1");
    }
    e.p = static_cast<int8_t>(p);
    events.push_back(e);
  }
  if (sensor.pixels() > 0) validate_events(events, sensor);
  return events;
}

void write_events_binary(std::ostream& os, const EventStream& stream) {
  constexpr int kMax = std::numeric_limits<uint16_t>::max();
  if (stream.sensor.height > kMax || stream.sensor.width > kMax) {
    throw IoError("sensor too large for the binary event format");
  }
  binio::put_magic(os, "EVT1");
  binio::put<uint16_t>(os, static_cast<uint16_t>(stream.sensor.height));
  binio::put<uint16_t>(os, static_cast<uint16_t>(stream.sensor.width));
  for (const Event& e : stream.events) {
    binio::put<double>(os, e.t);
    binio::put<uint16_t>(os, static_cast<uint16_t>(e.x));
    binio::put<uint16_t>(os, static_cast<uint16_t>(e.y));
    binio::put<int8_t>(os, e.p);
  }
}

EventStream read_events_binary(std::istream& is) {
  binio::expect_magic(is, "EVT1", "event file");
  EventStream s;
  s.sensor.height = binio::get<uint16_t>(is);
  s.sensor.width = binio::get<uint16_t>(is);
  while (is.peek() != std::char_traits<char>::eof()) {
    Event e;
    e.t = binio::get<double>(is);
    e.x = binio::get<uint16_t>(is);
    e.y = binio::get<uint16_t>(is);
    e.p = binio::get<int8_t>(is);
    s.events.push_back(e);
  }
  validate_events(s.events, s.sensor);
  return s;
}

void save_events(const std::filesystem::path& path, const EventStream& stream) {
  const bool binary = path.extension() == ".bin";
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  if (binary) {
    write_events_binary(os, stream);
  } else {
    write_events_text(os, stream.events);
  }
  if (!os) throw IoError("write failed for " + path.string());
}

EventStream load_events(const std::filesystem::path& path, SensorSize sensor_hint) {
  const bool binary = path.extension() == ".bin";
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw IoError("cannot open " + path.string());
  if (binary) return read_events_binary(is);
  return EventStream{sensor_hint, read_events_text(is, sensor_hint)};
}

}  // namespace evflow
