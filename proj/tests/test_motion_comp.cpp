#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "evflow/dataset.hpp"
#include "evflow/errors.hpp"
#include "evflow/motion_comp.hpp"
#include "testing.hpp"

using namespace evflow;
using evflow::testing::max_fd_error;
using evflow::testing::random_tensor;
using evflow::testing::random_volume;

namespace {

EventVolume volume(int h, int w, std::vector<Event> events) {
  EventVolume v;
  v.sensor = {h, w};
  v.t_start = 0.0;
  v.t_end = 1.0;
  v.normalized = true;
  v.events = std::move(events);
  return v;
}

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

Image splat_weights(const WarpedEvents& w, const std::vector<double>& weights) {
  return splat_bilinear(w, weights).pos;
}

int support(const Image& img) {
  int n = 0;
  for (double v : img.data) n += v > 0.0;
  return n;
}

double max_of(const Image& img) {
  double m = 0.0;
  for (double v : img.data) m = std::max(m, v);
  return m;
}

}  // namespace

TEST_CASE("warping examples") {
  const EventVolume v = volume(6, 6, {{2, 3, 0.5, 1}});
  Tensor f({2, 6, 6});
  f.at(0, 3, 2) = 2.0;
  f.at(1, 3, 2) = -2.0;
  const WarpedEvents w1 = warp_events(v, f, 1.0);
  CHECK(w1.x[0] == doctest::Approx(3.0));
  CHECK(w1.y[0] == doctest::Approx(2.0));
  const WarpedEvents w0 = warp_events(v, f, 0.0);
  CHECK(w0.x[0] == doctest::Approx(1.0));
  CHECK(w0.y[0] == doctest::Approx(4.0));
}

TEST_CASE("zero flow leaves events in place") {
  std::mt19937_64 rng(1);
  const EventVolume v = random_volume(8, 8, 20, rng);
  for (double t_ref : {0.0, 1.0}) {
    const WarpedEvents w = warp_events(v, Tensor({2, 8, 8}), t_ref);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w.x[i] == v.events[i].x);
      CHECK(w.y[i] == v.events[i].y);
    }
  }
}

TEST_CASE("unnormalized volumes are rejected") {
  EventVolume v = volume(4, 4, {{1, 1, 0.5, 1}});
  v.normalized = false;
  CHECK_THROWS(warp_events(v, Tensor({2, 4, 4}), 1.0));
}

TEST_CASE("bilinear splatting examples") {
  WarpedEvents w;
  w.sensor = {4, 4};
  w.x = {1.5, 3.0, -0.5};
  w.y = {2.0, 3.0, 0.0};
  w.t = {0.0, 0.0, 0.0};
  w.p = {1, 1, 1};
  w.src = {0, 0, 0};
  const Image a = splat_weights(w, {1.0, 0.0, 0.0});
  CHECK(a(2, 1) == doctest::Approx(0.5));
  CHECK(a(2, 2) == doctest::Approx(0.5));
  CHECK(a.sum() == doctest::Approx(1.0));
  const Image b = splat_weights(w, {0.0, 1.0, 0.0});
  CHECK(b(3, 3) == doctest::Approx(1.0));
  CHECK(b.sum() == doctest::Approx(1.0));
  const Image c = splat_weights(w, {0.0, 0.0, 1.0});
  CHECK(c(0, 0) == doctest::Approx(0.5));
  CHECK(c.sum() == doctest::Approx(0.5));
}

TEST_CASE("splatting conserves in-bounds mass") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(0.0, 14.0), wt(0.1, 2.0);
  WarpedEvents w;
  w.sensor = {16, 16};
  std::vector<double> weights;
  double total = 0.0;
  for (int i = 0; i < 200; ++i) {
    w.x.push_back(pos(rng));
    w.y.push_back(pos(rng));
    w.t.push_back(0.0);
    w.p.push_back(1);
    w.src.push_back(0);
    weights.push_back(wt(rng));
    total += weights.back();
  }
  CHECK(splat_weights(w, weights).sum() == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("average timestamp image examples") {
  const EventVolume v = volume(3, 3, {{1, 1, 0.2, 1}, {1, 1, 0.6, 1}, {2, 2, 1.0, -1}});
  const IWE iwe = avg_timestamp_iwe(v, Tensor({2, 3, 3}), 1.0);
  CHECK(iwe.kind == IweKind::avg_timestamp);
  CHECK(iwe.pos(1, 1) == doctest::Approx(0.4));
  CHECK(iwe.pos(0, 0) == 0.0);
  CHECK(iwe.neg(2, 2) == doctest::Approx(1.0).epsilon(1e-8));
  for (double x : iwe.pos.data) CHECK((x >= 0.0 && x <= 1.0));
}

TEST_CASE("exponential count image examples") {
  const EventVolume v = volume(3, 3, {{0, 0, 0.1, 1}, {0, 0, 0.3, 1}});
  const IWE iwe = exp_count_iwe(v, Tensor({2, 3, 3}), 1.0, 0.6);
  CHECK(iwe.pos(0, 0) == doctest::Approx(0.3011942119));
  CHECK(iwe.pos(1, 1) == 1.0);
  CHECK(iwe.neg(0, 0) == 1.0);
  CHECK_THROWS_AS(exp_count_iwe(v, Tensor({2, 3, 3}), 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(exp_count_iwe(v, Tensor({2, 3, 3}), 1.0, -1.0), ConfigError);
}

TEST_CASE("ground-truth flow sharpens the count image") {
  // Nearest-pixel emission jitters events by up to half a pixel, which the
  // bilinear kernel spreads further; sharpening is checked for motions of a
  // few pixels per volume where the zero-flow trail dominates that spread.
  TranslationScene ts;
  ts.dots = 6;
  ts.bar_length = 5;
  ts.volumes = 2;
  for (auto [u, v] : {std::pair{4.0, 0.0}, std::pair{0.0, -4.0}, std::pair{3.0, 3.0}, std::pair{-5.0, 2.0}}) {
    std::mt19937_64 rng(11);
    const Scene scene = generate(make_translation_scene(ts, u, v, rng));
    const auto vols = slice_fixed(scene.events, 0.0, ts.interval, ts.volumes, ts.sensor);
    for (const EventVolume& raw : vols) {
      const EventVolume ev = normalize_timestamps(raw);
      const IWE sharp = plain_count_iwe(ev, constant_flow(64, 64, u, v), 1.0);
      const IWE blurred = plain_count_iwe(ev, Tensor({2, 64, 64}), 1.0);
      CHECK(max_of(sharp.pos) > max_of(blurred.pos));
      CHECK(support(sharp.pos) < support(blurred.pos));
    }
  }
}

TEST_CASE("IWE gradients match finite differences") {
  std::mt19937_64 rng(3);
  const EventVolume v = random_volume(8, 8, 20, rng);
  Tensor flow = random_tensor({2, 8, 8}, rng, -1.3, 1.3);
  // Smooth scalar reductions of both IWEs.
  auto reduce = [&](const Tensor& f, Tensor* grad) {
    double s = 0.0;
    for (double t_ref : {0.0, 1.0}) {
      const WarpedEvents w = warp_events(v, f, t_ref);
      std::vector<double> ones(w.size(), 1.0);
      const PolaritySplat sp = splat_bilinear(w, ones);
      for (int c = 0; c < 2; ++c) {
        const Image& img = c == 0 ? sp.pos : sp.neg;
        for (std::size_t i = 0; i < img.data.size(); ++i) s += std::exp(-0.6 * img.data[i]) * (1.0 + 0.01 * i);
      }
      if (!grad) continue;
      SplatTaps taps;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const Image& img = w.p[i] > 0 ? sp.pos : sp.neg;
        const int n = bilinear_taps(w.x[i], w.y[i], w.sensor, taps);
        double gx = 0.0, gy = 0.0;
        for (int k = 0; k < n; ++k) {
          const std::size_t idx = static_cast<std::size_t>(taps[k].y) * 8 + taps[k].x;
          const double d = -0.6 * std::exp(-0.6 * img.data[idx]) * (1.0 + 0.01 * idx);
          gx += d * taps[k].dwdx;
          gy += d * taps[k].dwdy;
        }
        (*grad)[w.src[i]] += (t_ref - w.t[i]) * gx;
        (*grad)[64 + w.src[i]] += (t_ref - w.t[i]) * gy;
      }
    }
    return s;
  };
  Tensor grad({2, 8, 8});
  reduce(flow, &grad);
  CHECK(max_fd_error([&] { return reduce(flow, nullptr); }, flow, grad, {}, 1e-6) <= 1e-4);
}

TEST_CASE("IWE debug dump round trip") {
  std::mt19937_64 rng(4);
  const EventVolume v = random_volume(5, 7, 15, rng);
  const IWE iwe = avg_timestamp_iwe(v, random_tensor({2, 5, 7}, rng), 0.0);
  std::stringstream ss;
  write_iwe(ss, iwe);
  const IWE back = read_iwe(ss);
  CHECK(back.kind == iwe.kind);
  REQUIRE(back.pos.data.size() == iwe.pos.data.size());
  for (std::size_t i = 0; i < iwe.pos.data.size(); ++i) {
    CHECK(back.pos.data[i] == doctest::Approx(iwe.pos.data[i]).epsilon(1e-6));
    CHECK(back.neg.data[i] == doctest::Approx(iwe.neg.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("non-finite flow is rejected before warping") {
  const EventVolume v = volume(4, 4, {{1, 1, 0.5, 1}});
  Tensor f({2, 4, 4});
  f.at(0, 1, 1) = std::nan("");
  CHECK_THROWS_AS(warp_events(v, f, 1.0), NumericalError);
}
