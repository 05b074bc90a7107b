#include "evflow/motion_comp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "binio.hpp"
#include "evflow/errors.hpp"

namespace evflow {

namespace {

void check_flow(const Tensor& flow, SensorSize sensor, const char* who) {
  if (flow.ndim() != 3 || flow.channels() != 2 || flow.height() != sensor.height ||
      flow.width() != sensor.width) {
    throw ShapeError(std::string(who) + ": flow " + shape_str(flow.shape()) +
                     " does not match sensor " + std::to_string(sensor.height) + "x" +
                     std::to_string(sensor.width));
  }
}

}  // namespace

WarpedEvents warp_events(const EventVolume& v, const Tensor& flow, double t_ref) {
  if (!v.normalized) throw ConfigError("warp_events: volume timestamps are not normalized");
  check_flow(flow, v.sensor, "warp_events");
  if (!flow.all_finite()) throw NumericalError("warp_events: flow contains non-finite values");
  WarpedEvents out;
  out.t_ref = t_ref;
  out.sensor = v.sensor;
  const std::size_t n = v.events.size();
  out.x.resize(n);
  out.y.resize(n);
  out.t.resize(n);
  out.p.resize(n);
  out.src.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Event& e = v.events[i];
    const double dt = t_ref - e.t;
    out.x[i] = e.x + dt * flow.at(0, e.y, e.x);
    out.y[i] = e.y + dt * flow.at(1, e.y, e.x);
    out.t[i] = e.t;
    out.p[i] = e.p;
    out.src[i] = e.y * v.sensor.width + e.x;
  }
  return out;
}

namespace {

struct AxisTap {
  double pos, k, dk;
};

// Kernel weights and derivatives along one axis. At an exact integer the
// kernel has a kink; the derivative there is the mean of both one-sided
// derivatives, which spreads it over the two neighbours.
int axis_taps(double v, std::array<AxisTap, 3>& out) {
  const double f = std::floor(v);
  const double a = v - f;
  if (a == 0.0) {
    out[0] = {f - 1, 0.0, -0.5};
    out[1] = {f, 1.0, 0.0};
    out[2] = {f + 1, 0.0, 0.5};
    return 3;
  }
  out[0] = {f, 1.0 - a, -1.0};
  out[1] = {f + 1, a, 1.0};
  return 2;
}

}  // namespace

int bilinear_taps(double x, double y, SensorSize sensor, SplatTaps& taps) {
  std::array<AxisTap, 3> tx, ty;
  const int nx = axis_taps(x, tx);
  const int ny = axis_taps(y, ty);
  int n = 0;
  for (int j = 0; j < ny; ++j) {
    if (ty[j].pos < 0 || ty[j].pos >= sensor.height) continue;
    for (int i = 0; i < nx; ++i) {
      if (tx[i].pos < 0 || tx[i].pos >= sensor.width) continue;
      const SplatTap t{static_cast<int>(tx[i].pos), static_cast<int>(ty[j].pos), tx[i].k * ty[j].k,
                       tx[i].dk * ty[j].k, tx[i].k * ty[j].dk};
      if (t.w != 0.0 || t.dwdx != 0.0 || t.dwdy != 0.0) taps[n++] = t;
    }
  }
  return n;
}

PolaritySplat splat_bilinear(const WarpedEvents& w, std::span<const double> weights) {
  if (weights.size() != w.size()) throw ShapeError("splat_bilinear: one weight per event required");
  PolaritySplat out{Image(w.sensor.height, w.sensor.width), Image(w.sensor.height, w.sensor.width)};
  SplatTaps taps;
  for (std::size_t i = 0; i < w.size(); ++i) {
    Image& img = w.p[i] > 0 ? out.pos : out.neg;
    const int n = bilinear_taps(w.x[i], w.y[i], w.sensor, taps);
    for (int k = 0; k < n; ++k) img(taps[k].y, taps[k].x) += weights[i] * taps[k].w;
  }
  return out;
}

IWE avg_timestamp_iwe(const EventVolume& v, const Tensor& flow, double t_ref) {
  const WarpedEvents w = warp_events(v, flow, t_ref);
  const std::vector<double> ones(w.size(), 1.0);
  PolaritySplat num = splat_bilinear(w, w.t);
  const PolaritySplat den = splat_bilinear(w, ones);
  for (std::size_t i = 0; i < num.pos.data.size(); ++i) {
    num.pos.data[i] /= den.pos.data[i] + kAvgTimestampEps;
    num.neg.data[i] /= den.neg.data[i] + kAvgTimestampEps;
  }
  return IWE{std::move(num.pos), std::move(num.neg), IweKind::avg_timestamp};
}

IWE exp_count_iwe(const EventVolume& v, const Tensor& flow, double t_ref, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("exp_count_iwe: saturation factor must be positive");
  IWE iwe = plain_count_iwe(v, flow, t_ref);
  for (double& c : iwe.pos.data) c = std::exp(-alpha * c);
  for (double& c : iwe.neg.data) c = std::exp(-alpha * c);
  iwe.kind = IweKind::exp_count;
  return iwe;
}

IWE plain_count_iwe(const EventVolume& v, const Tensor& flow, double t_ref) {
  const WarpedEvents w = warp_events(v, flow, t_ref);
  const std::vector<double> ones(w.size(), 1.0);
  PolaritySplat s = splat_bilinear(w, ones);
  return IWE{std::move(s.pos), std::move(s.neg), IweKind::plain_count};
}

void write_iwe(std::ostream& os, const IWE& iwe) {
  binio::put_magic(os, "IWE1");
  binio::put<uint16_t>(os, static_cast<uint16_t>(iwe.pos.height));
  binio::put<uint16_t>(os, static_cast<uint16_t>(iwe.pos.width));
  binio::put<uint8_t>(os, static_cast<uint8_t>(iwe.kind));
  for (double v : iwe.pos.data) binio::put<float>(os, static_cast<float>(v));
  for (double v : iwe.neg.data) binio::put<float>(os, static_cast<float>(v));
}

IWE read_iwe(std::istream& is) {
  binio::expect_magic(is, "IWE1", "IWE file");
  const int h = binio::get<uint16_t>(is);
  const int w = binio::get<uint16_t>(is);
  const uint8_t kind = binio::get<uint8_t>(is);
  if (kind > 2) throw IoError("IWE file: unknown kind byte " + std::to_string(kind));
  IWE iwe{Image(h, w), Image(h, w), static_cast<IweKind>(kind)};
  for (double& v : iwe.pos.data) v = binio::get<float>(is);
  for (double& v : iwe.neg.data) v = binio::get<float>(is);
  return iwe;
}

}  // namespace evflow
