#include "evflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "binio.hpp"
#include "evflow/errors.hpp"

namespace evflow {

namespace {

int round_nearest(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

int GroundTruthFlow::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), uint8_t{1}));
}

void validate_scene(const SceneSpec& spec) {
  if (!(spec.event_rate > 0.0)) throw ConfigError("scene: event_rate must be positive");
  if (!(spec.duration > 0.0)) throw ConfigError("scene: duration must be positive");
  if (spec.sensor.height <= 0 || spec.sensor.width <= 0) throw ConfigError("scene: empty sensor");
  const bool dithered = spec.quantization == Quantization::dithered;
  for (std::size_t i = 0; i < spec.particles.size(); ++i) {
    const Particle& p = spec.particles[i];
    if (p.polarity != 1 && p.polarity != -1) {
      throw ConfigError("scene: particle " + std::to_string(i) + " has invalid polarity");
    }
    const double x1 = p.x0 + p.vx * spec.duration;
    const double y1 = p.y0 + p.vy * spec.duration;
    const double xs[2] = {std::min(p.x0, x1), std::max(p.x0, x1)};
    const double ys[2] = {std::min(p.y0, y1), std::max(p.y0, y1)};
    const int xlo = dithered ? static_cast<int>(std::floor(xs[0])) : round_nearest(xs[0]);
    const int xhi = dithered ? static_cast<int>(std::ceil(xs[1])) : round_nearest(xs[1]);
    const int ylo = dithered ? static_cast<int>(std::floor(ys[0])) : round_nearest(ys[0]);
    const int yhi = dithered ? static_cast<int>(std::ceil(ys[1])) : round_nearest(ys[1]);
    if (xlo < 0 || ylo < 0 || xhi >= spec.sensor.width || yhi >= spec.sensor.height) {
      throw BoundsError("scene: particle " + std::to_string(i) + " starting at (" +
                        std::to_string(p.x0) + ", " + std::to_string(p.y0) +
                        ") leaves the sensor within the scene duration");
    }
  }
}

Scene generate(const SceneSpec& spec) {
  validate_scene(spec);
  struct Tagged {
    Event e;
    int src;
  };
  std::vector<Tagged> all;
  for (std::size_t i = 0; i < spec.particles.size(); ++i) {
    const Particle& p = spec.particles[i];
    std::seed_seq seq{spec.seed, static_cast<uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> gap(spec.event_rate);

    const double phase = unit(rng);
    double t = spec.timing == EmissionTiming::uniform ? phase / spec.event_rate : gap(rng);
    int8_t pol = p.polarity;
    for (long j = 1; t < spec.duration; ++j) {
      const double px = p.x0 + p.vx * t;
      const double py = p.y0 + p.vy * t;
      Event e;
      e.t = t;
      if (spec.quantization == Quantization::nearest) {
        e.x = round_nearest(px);
        e.y = round_nearest(py);
      } else {
        const double fx = std::floor(px);
        const double fy = std::floor(py);
        e.x = static_cast<int>(fx) + (unit(rng) < px - fx ? 1 : 0);
        e.y = static_cast<int>(fy) + (unit(rng) < py - fy ? 1 : 0);
      }
      e.p = pol;
      all.push_back({e, static_cast<int>(i)});
      if (p.alternate_polarity) pol = static_cast<int8_t>(-pol);
      if (spec.timing == EmissionTiming::uniform) {
        t = (static_cast<double>(j) + phase) / spec.event_rate;
      } else {
        t += gap(rng);
      }
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Tagged& a, const Tagged& b) { return a.e.t < b.e.t; });
  Scene scene;
  scene.events.reserve(all.size());
  scene.source.reserve(all.size());
  for (const auto& tg : all) {
    scene.events.push_back(tg.e);
    scene.source.push_back(tg.src);
  }
  scene.ground_truth = GroundTruthFactory(spec);
  return scene;
}

GroundTruthFlow GroundTruthFactory::operator()(double t_start, double t_end) const {
  const int h = spec_.sensor.height;
  const int w = spec_.sensor.width;
  GroundTruthFlow gt{Tensor({2, h, w}), std::vector<uint8_t>(static_cast<std::size_t>(h) * w, 0)};
  std::vector<int> hits(static_cast<std::size_t>(h) * w, 0);
  const double dt = t_end - t_start;
  const double a = std::max(t_start, 0.0);
  const double b = std::min(t_end, spec_.duration);
  for (const Particle& p : spec_.particles) {
    if (!(b > a)) break;
    const double travel = std::hypot(p.vx, p.vy) * (b - a);
    const int steps = static_cast<int>(std::ceil(travel / 0.05)) + 1;
    int last = -1;
    for (int s = 0; s < steps; ++s) {
      const double t = a + (b - a) * s / steps;
      const int x = round_nearest(p.x0 + p.vx * t);
      const int y = round_nearest(p.y0 + p.vy * t);
      if (!spec_.sensor.contains(x, y)) continue;
      const int idx = y * w + x;
      if (idx == last) continue;
      last = idx;
      gt.u.at(0, y, x) += p.vx * dt;
      gt.u.at(1, y, x) += p.vy * dt;
      ++hits[idx];
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int n = hits[y * w + x];
      if (n > 0) {
        gt.u.at(0, y, x) /= n;
        gt.u.at(1, y, x) /= n;
        gt.valid[y * w + x] = 1;
      }
    }
  }
  return gt;
}

SceneSpec make_translation_scene(const TranslationScene& cfg, double flow_u, double flow_v,
                                 std::mt19937_64& rng) {
  SceneSpec spec;
  spec.sensor = cfg.sensor;
  spec.duration = cfg.interval * cfg.volumes;
  spec.event_rate = cfg.event_rate;
  spec.timing = cfg.timing;
  spec.seed = rng();
  const double vx = flow_u / cfg.interval;
  const double vy = flow_v / cfg.interval;
  const double norm = std::hypot(flow_u, flow_v);
  const double lead_x = norm > 0 ? flow_u / norm : 0.0;
  const double lead_y = norm > 0 ? flow_v / norm : 0.0;
  const double shift_x = vx * spec.duration;
  const double shift_y = vy * spec.duration;
  // Bar particles sit at unit spacing across the motion direction.
  const double across_x = norm > 0 ? -lead_y : 0.0;
  const double across_y = norm > 0 ? lead_x : 1.0;
  const double half = 0.5 * (cfg.bar_length - 1);
  const double mx = half * std::abs(across_x);
  const double my = half * std::abs(across_y);
  const double x_lo = 1.0 + mx - std::min(0.0, shift_x) - std::min(0.0, lead_x);
  const double x_hi = cfg.sensor.width - 2.0 - mx - std::max(0.0, shift_x) - std::max(0.0, lead_x);
  const double y_lo = 1.0 + my - std::min(0.0, shift_y) - std::min(0.0, lead_y);
  const double y_hi = cfg.sensor.height - 2.0 - my - std::max(0.0, shift_y) - std::max(0.0, lead_y);
  if (x_hi < x_lo || y_hi < y_lo) {
    throw ConfigError("translation scene: flow too large for the sensor and duration");
  }
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  std::uniform_real_distribution<double> uy(y_lo, y_hi);
  for (int d = 0; d < cfg.dots; ++d) {
    const double cx = ux(rng);
    const double cy = uy(rng);
    for (int j = 0; j < cfg.bar_length; ++j) {
      const double bx = cx + (j - half) * across_x;
      const double by = cy + (j - half) * across_y;
      spec.particles.push_back({bx + lead_x, by + lead_y, vx, vy, int8_t{1}, false});
      spec.particles.push_back({bx, by, vx, vy, int8_t{-1}, false});
    }
  }
  return spec;
}

void write_flow(std::ostream& os, const GroundTruthFlow& gt) {
  const int h = gt.u.height();
  const int w = gt.u.width();
  binio::put_magic(os, "FLO1");
  binio::put<uint16_t>(os, static_cast<uint16_t>(h));
  binio::put<uint16_t>(os, static_cast<uint16_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      binio::put<float>(os, static_cast<float>(gt.u.at(0, y, x)));
      binio::put<float>(os, static_cast<float>(gt.u.at(1, y, x)));
    }
  }
  for (uint8_t m : gt.valid) binio::put<uint8_t>(os, m ? 1 : 0);
}

GroundTruthFlow read_flow(std::istream& is) {
  binio::expect_magic(is, "FLO1", "flow file");
  const int h = binio::get<uint16_t>(is);
  const int w = binio::get<uint16_t>(is);
  GroundTruthFlow gt{Tensor({2, h, w}), std::vector<uint8_t>(static_cast<std::size_t>(h) * w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gt.u.at(0, y, x) = binio::get<float>(is);
      gt.u.at(1, y, x) = binio::get<float>(is);
    }
  }
  for (auto& m : gt.valid) m = binio::get<uint8_t>(is);
  return gt;
}

void save_flow(const std::filesystem::path& path, const GroundTruthFlow& gt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_flow(os, gt);
}

GroundTruthFlow load_flow(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_flow(is);
}

}  // namespace evflow
