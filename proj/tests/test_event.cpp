#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "evflow/errors.hpp"
#include "evflow/event.hpp"
#include "evflow/event_io.hpp"

using namespace evflow;

namespace {

std::vector<Event> at_times(std::initializer_list<double> ts) {
  std::vector<Event> out;
  for (double t : ts) out.push_back({0, 0, t, 1});
  return out;
}

}  // namespace

TEST_CASE("slice_stream uses half-open intervals") {
  const auto vols = slice_stream(at_times({0.01, 0.03, 0.06}), 0.05, {4, 4});
  REQUIRE(vols.size() == 2);
  CHECK(vols[0].size() == 2);
  CHECK(vols[1].size() == 1);
  CHECK(vols[0].t_start == doctest::Approx(0.0));
  CHECK(vols[1].t_start == doctest::Approx(0.05));
}

TEST_CASE("slice_stream on an empty stream is empty") {
  CHECK(slice_stream({}, 0.1, {4, 4}).empty());
}

TEST_CASE("uniform stream splits evenly") {
  std::vector<Event> ev;
  for (int i = 0; i < 1000; ++i) ev.push_back({0, 0, i / 1000.0, 1});
  const auto vols = slice_stream(ev, 0.1, {1, 1});
  REQUIRE(vols.size() == 10);
  for (const auto& v : vols) CHECK(v.size() == 100);
}

TEST_CASE("boundary events go to the later volume") {
  const auto vols = slice_stream(at_times({0.0, 0.1, 0.2, 0.3}), 0.1, {1, 1});
  REQUIRE(vols.size() == 4);
  for (const auto& v : vols) CHECK(v.size() == 1);
}

TEST_CASE("unsorted input is rejected") {
  CHECK_THROWS_AS(slice_stream(at_times({0.2, 0.1}), 0.1, {1, 1}), OrderingError);
  CHECK_THROWS_AS(slice_stream(at_times({0.1}), 0.0, {1, 1}), ConfigError);
}

TEST_CASE("slicing partitions the stream") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0.0, 3.0);
  std::vector<Event> ev;
  for (int i = 0; i < 500; ++i) ev.push_back({i % 7, i % 5, d(rng), static_cast<int8_t>(i % 2 ? 1 : -1)});
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  const auto vols = slice_stream(ev, 0.37, {5, 7});
  std::vector<Event> joined;
  for (const auto& v : vols) {
    for (const auto& e : v.events) {
      CHECK(e.t >= v.t_start - 1e-9);
      CHECK(e.t < v.t_end);
    }
    joined.insert(joined.end(), v.events.begin(), v.events.end());
  }
  CHECK(joined == ev);
  for (std::size_t k = 0; k + 1 < vols.size(); ++k) CHECK(vols[k].t_end == doctest::Approx(vols[k + 1].t_start));
}

TEST_CASE("normalize_timestamps maps the interval onto [0, 1]") {
  EventVolume v;
  v.t_start = 100.0;
  v.t_end = 100.2;
  v.sensor = {1, 1};
  v.events = at_times({100.0, 100.1, 100.2});
  const EventVolume n = normalize_timestamps(v);
  CHECK(n.normalized);
  CHECK(n.events[0].t == doctest::Approx(0.0));
  CHECK(n.events[1].t == doctest::Approx(0.5));
  CHECK(n.events[2].t == doctest::Approx(1.0));

  const EventVolume again = normalize_timestamps(n);
  CHECK(again.events == n.events);

  v.t_end = v.t_start;
  CHECK_THROWS_AS(normalize_timestamps(v), DegenerateIntervalError);
}

TEST_CASE("normalization is affine and keeps order") {
  EventVolume v;
  v.t_start = 2.0;
  v.t_end = 6.0;
  v.sensor = {1, 1};
  v.events = at_times({2.5, 3.0, 4.0, 5.5});
  const EventVolume n = normalize_timestamps(v);
  for (std::size_t i = 0; i + 1 < n.events.size(); ++i) {
    CHECK(n.events[i].t <= n.events[i + 1].t);
    const double raw = v.events[i + 1].t - v.events[i].t;
    CHECK(n.events[i + 1].t - n.events[i].t == doctest::Approx(raw / 4.0));
  }
}

TEST_CASE("count image counts per polarity") {
  EventVolume v;
  v.sensor = {3, 3};
  v.events = {{1, 1, 0.0, 1}, {1, 1, 0.1, 1}, {2, 0, 0.2, -1}};
  const CountImage c = count_image(v);
  CHECK(c.pos(1, 1) == 2.0);
  CHECK(c.neg(0, 2) == 1.0);
  CHECK(c.pos.sum() == 2.0);
  CHECK(c.neg.sum() == 1.0);

  const Tensor t = c.to_tensor();
  CHECK(t.at(0, 1, 1) == 2.0);
  CHECK(t.at(1, 0, 2) == 1.0);
}

TEST_CASE("count image of an empty volume is zero") {
  EventVolume v;
  v.sensor = {4, 5};
  const CountImage c = count_image(v);
  CHECK(c.pos.sum() == 0.0);
  CHECK(c.neg.sum() == 0.0);
}

TEST_CASE("count image of unique events") {
  EventVolume v;
  v.sensor = {4, 4};
  for (int i = 0; i < 5; ++i) v.events.push_back({i % 4, i / 4, 0.0, 1});
  const CountImage c = count_image(v);
  CHECK(c.pos.sum() == 5.0);
  CHECK(*std::max_element(c.pos.data.begin(), c.pos.data.end()) == 1.0);
}

TEST_CASE("count image ignores event order and totals the event count") {
  std::mt19937_64 rng(4);
  EventVolume v;
  v.sensor = {6, 6};
  std::uniform_int_distribution<int> d(0, 5);
  for (int i = 0; i < 60; ++i) v.events.push_back({d(rng), d(rng), 0.0, static_cast<int8_t>(d(rng) < 3 ? 1 : -1)});
  const CountImage a = count_image(v);
  std::shuffle(v.events.begin(), v.events.end(), rng);
  const CountImage b = count_image(v);
  CHECK(a.pos.data == b.pos.data);
  CHECK(a.neg.data == b.neg.data);
  CHECK(a.pos.sum() + a.neg.sum() == 60.0);
}

TEST_CASE("out-of-sensor events are rejected") {
  EventVolume v;
  v.sensor = {2, 2};
  v.events = {{2, 0, 0.0, 1}};
  CHECK_THROWS_AS(count_image(v), BoundsError);
  CHECK_THROWS_AS(validate_events(v.events, v.sensor), BoundsError);
  const std::vector<Event> bad_polarity{{0, 0, 0.0, 0}};
  CHECK_THROWS_AS(validate_events(bad_polarity, v.sensor), BoundsError);
}

TEST_CASE("merge_volumes joins consecutive volumes") {
  std::vector<Event> ev;
  for (int i = 0; i < 40; ++i) ev.push_back({0, 0, i * 0.01, 1});
  const auto vols = slice_stream(ev, 0.05, {1, 1});
  REQUIRE(vols.size() == 8);
  const auto merged = merge_volumes(vols, 4);
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].size() == 20);
  CHECK(merged[0].t_start == doctest::Approx(0.0));
  CHECK(merged[0].t_end == doctest::Approx(0.2));
  CHECK(merged[1].t_end == doctest::Approx(0.4));
}

TEST_CASE("text event format round-trips exactly") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dt(0.0, 10.0);
  std::vector<Event> ev;
  for (int i = 0; i < 50; ++i) ev.push_back({i % 9, i % 4, dt(rng), static_cast<int8_t>(i % 3 ? 1 : -1)});
  std::stringstream ss;
  write_events_text(ss, ev);
  CHECK(read_events_text(ss, {4, 9}) == ev);
}

TEST_CASE("text format skips comments and validates") {
  std::stringstream ok("# header\n0.5 1 2 1\n\n0.75 0 0 -1  # trailing\n");
  const auto ev = read_events_text(ok, {3, 3});
  REQUIRE(ev.size() == 2);
  CHECK(ev[1].p == -1);
  std::stringstream bad("0.5 5 0 1\n");
  CHECK_THROWS(read_events_text(bad, {3, 3}));
}

TEST_CASE("binary event format round-trips") {
  EventStream s{{16, 24}, {{3, 4, 0.125, 1}, {23, 15, 1.5, -1}}};
  std::stringstream ss;
  write_events_binary(ss, s);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "EVT1");
  CHECK(bytes.size() == 4 + 2 + 2 + 2 * (8 + 2 + 2 + 1));
  const EventStream r = read_events_binary(ss);
  CHECK(r.sensor == s.sensor);
  CHECK(r.events == s.events);

  std::stringstream junk("NOPE");
  CHECK_THROWS_AS(read_events_binary(junk), IoError);
}
