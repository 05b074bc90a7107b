#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "evflow/dataset.hpp"
#include "evflow/errors.hpp"
#include "evflow/metrics.hpp"
#include "testing.hpp"

using namespace evflow;
using evflow::testing::random_tensor;
using evflow::testing::random_volume;

namespace {

Tensor constant_flow(int h, int w, double u, double v) {
  Tensor f({2, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.at(0, y, x) = u;
      f.at(1, y, x) = v;
    }
  }
  return f;
}

GroundTruthFlow gt_of(const Tensor& u) {
  return GroundTruthFlow{u, std::vector<uint8_t>(static_cast<std::size_t>(u.height()) * u.width(), 1)};
}

EvalMask single_pixel(SensorSize s, int y, int x) {
  EvalMask m{s, std::vector<uint8_t>(static_cast<std::size_t>(s.pixels()), 0)};
  m.valid[static_cast<std::size_t>(y) * s.width + x] = 1;
  return m;
}

// Bar scenes moving a few pixels per volume, where the zero-flow trail
// dominates the half-pixel emission jitter.
std::vector<std::pair<EventVolume, Tensor>> bar_scenes() {
  std::vector<std::pair<EventVolume, Tensor>> out;
  TranslationScene ts;
  ts.dots = 6;
  ts.bar_length = 5;
  ts.volumes = 2;
  for (auto [u, v] : {std::pair{4.0, 0.0}, std::pair{0.0, -4.0}, std::pair{3.0, 3.0}, std::pair{-5.0, 2.0}}) {
    std::mt19937_64 rng(31);
    const Scene scene = generate(make_translation_scene(ts, u, v, rng));
    for (const EventVolume& raw : slice_fixed(scene.events, 0.0, ts.interval, ts.volumes, ts.sensor)) {
      out.emplace_back(normalize_timestamps(raw), constant_flow(64, 64, u, v));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("AEE examples") {
  const SensorSize s{4, 5};
  const GroundTruthFlow zero = gt_of(Tensor({2, 4, 5}));
  CHECK(aee(constant_flow(4, 5, 1.0, 0.0), zero, full_mask(s)) == doctest::Approx(1.0));
  CHECK(aee(zero.u, zero, full_mask(s)) == 0.0);
  Tensor p({2, 4, 5});
  p.at(0, 2, 3) = 3.0;
  p.at(1, 2, 3) = 4.0;
  CHECK(aee(p, zero, single_pixel(s, 2, 3)) == doctest::Approx(5.0));
  const EvalMask empty{s, std::vector<uint8_t>(20, 0)};
  CHECK_THROWS_AS(aee(p, zero, empty), UndefinedMetricError);
  CHECK_THROWS_AS(aee(Tensor({2, 3, 5}), zero, full_mask(s)), ShapeError);
}

TEST_CASE("AEE is invariant to a common offset") {
  std::mt19937_64 rng(1);
  const Tensor pred = random_tensor({2, 6, 6}, rng, -3.0, 3.0);
  const Tensor gt = random_tensor({2, 6, 6}, rng, -3.0, 3.0);
  Tensor pred2 = pred, gt2 = gt;
  for (std::size_t i = 0; i < 36; ++i) {
    pred2[i] += 1.7;
    gt2[i] += 1.7;
    pred2[36 + i] -= 0.4;
    gt2[36 + i] -= 0.4;
  }
  CHECK(aee(pred2, gt_of(gt2), full_mask({6, 6})) ==
        doctest::Approx(aee(pred, gt_of(gt), full_mask({6, 6}))).epsilon(1e-12));
}

TEST_CASE("outlier examples") {
  const SensorSize s{1, 1};
  const EvalMask m = full_mask(s);
  // EE 4 against |gt| 10: both thresholds exceeded.
  CHECK(outlier_rate(constant_flow(1, 1, 10.0, 4.0), gt_of(constant_flow(1, 1, 10.0, 0.0)), m) == 100.0);
  CHECK(outlier_rate(constant_flow(1, 1, 2.9, 0.0), gt_of(Tensor({2, 1, 1})), m) == 0.0);
  CHECK(outlier_rate(constant_flow(1, 1, 100.0, 4.0), gt_of(constant_flow(1, 1, 100.0, 0.0)), m) == 0.0);
  CHECK_THROWS_AS(outlier_rate(Tensor({2, 1, 1}), gt_of(Tensor({2, 1, 1})), EvalMask{s, {0}}),
                  UndefinedMetricError);
}

TEST_CASE("outlier rate is bounded and nonincreasing in the pixel threshold") {
  std::mt19937_64 rng(2);
  const Tensor pred = random_tensor({2, 8, 8}, rng, -6.0, 6.0);
  const GroundTruthFlow gt = gt_of(random_tensor({2, 8, 8}, rng, -2.0, 2.0));
  double prev = 100.0;
  for (double t = 0.0; t <= 10.0; t += 0.5) {
    const double r = outlier_rate(pred, gt, full_mask({8, 8}), t);
    CHECK(r >= 0.0);
    CHECK(r <= prev);
    prev = r;
  }
}

TEST_CASE("evaluation mask needs valid ground truth and an event") {
  GroundTruthFlow gt = gt_of(Tensor({2, 3, 3}));
  gt.valid[4] = 0;
  EventVolume v;
  v.sensor = {3, 3};
  v.t_end = 1.0;
  v.events = {{1, 1, 0.2, 1}, {2, 0, 0.3, -1}, {2, 0, 0.4, 1}};
  const EvalMask m = make_eval_mask(gt, v);
  CHECK(m.count() == 1);
  CHECK(m(0, 2));
  CHECK_FALSE(m(1, 1));
  for (std::size_t i = 0; i < m.valid.size(); ++i) {
    if (m.valid[i]) CHECK(gt.valid[i]);
  }
}

TEST_CASE("FWL and RSAT are exactly one at zero flow") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const EventVolume v = random_volume(16, 16, 60, rng);
    CHECK(fwl(v, Tensor({2, 16, 16})) == 1.0);
    CHECK(rsat(v, Tensor({2, 16, 16})) == 1.0);
    CHECK(rsat(v, Tensor({2, 16, 16}), true) == 1.0);
  }
}

TEST_CASE("degenerate baselines are undefined") {
  EventVolume empty;
  empty.sensor = {4, 4};
  empty.t_end = 1.0;
  empty.normalized = true;
  CHECK_THROWS_AS(fwl(empty, Tensor({2, 4, 4})), UndefinedMetricError);
  CHECK_THROWS_AS(rsat(empty, Tensor({2, 4, 4})), UndefinedMetricError);
}

TEST_CASE("ground-truth flow sharpens and aligns bar scenes") {
  for (const auto& [v, gt] : bar_scenes()) {
    const double f = fwl(v, gt);
    CHECK(f > 1.0);
    CHECK(rsat(v, gt) < 1.0);
    Tensor half = gt;
    for (double& x : half.values()) x *= 0.5;
    CHECK(rsat(v, gt) < rsat(v, half));

    std::mt19937_64 rng(32);
    CHECK(fwl(v, random_tensor({2, 64, 64}, rng, -5.0, 5.0)) < f);
  }
}

TEST_CASE("ground truth lowers RSAT on the default synthetic scenes") {
  DataConfig data;
  for (int index = 0; index < 5; ++index) {
    const Sequence seq = make_synthetic_sequence(data, 3, 41, Split::train, index);
    for (const EventVolume& raw : seq.volumes) {
      const EventVolume v = normalize_timestamps(raw);
      CHECK(rsat(v, constant_flow(64, 64, seq.flow_u, seq.flow_v)) < 1.0);
    }
  }
}

TEST_CASE("report CSV and summary") {
  MetricReport r;
  r.rows.push_back({"a", 0, 2.0, 10.0, 1.5, 0.8});
  r.rows.push_back({"a", 1, std::nullopt, std::nullopt, 0.5, 1.2});
  r.rows.push_back({"b", 0, 4.0, 30.0, 1.0, 1.0});
  const MetricRow s = r.summary();
  CHECK(*s.aee == doctest::Approx(3.0));
  CHECK(*s.outlier_pct == doctest::Approx(20.0));
  CHECK(s.fwl == doctest::Approx(1.0));
  CHECK(s.rsat == doctest::Approx(1.0));
  std::ostringstream os;
  write_report_csv(os, r);
  CHECK(os.str() ==
        "sequence,volume_index,aee,outlier_pct,fwl,rsat\n"
        "a,0,2,10,1.5,0.8\n"
        "a,1,,,0.5,1.2\n"
        "b,0,4,30,1,1\n"
        "mean,,3,20,1,1\n");
}
