#include "evflow/loss.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "evflow/errors.hpp"
#include "evflow/motion_comp.hpp"

namespace evflow {

void LossConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("loss.alpha must be positive");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("loss weights must be non-negative");
  if (!(charbonnier_eps > 0.0) || !(charbonnier_gamma > 0.0)) {
    throw ConfigError("Charbonnier constants must be positive");
  }
}

bool LossBreakdown::finite() const {
  for (double v : {l_at_t0, l_at_t1, l_ec_t0, l_ec_t1, l_smooth, total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  l_at_t0 += o.l_at_t0;
  l_at_t1 += o.l_at_t1;
  l_ec_t0 += o.l_ec_t0;
  l_ec_t1 += o.l_ec_t1;
  l_smooth += o.l_smooth;
  total += o.total;
  return *this;
}

LossBreakdown& LossBreakdown::operator*=(double s) {
  l_at_t0 *= s;
  l_at_t1 *= s;
  l_ec_t0 *= s;
  l_ec_t1 *= s;
  l_smooth *= s;
  total *= s;
  return *this;
}

std::string to_string(const LossBreakdown& b) {
  std::ostringstream os;
  os << std::setprecision(9) << "l_at_t0=" << b.l_at_t0 << " l_at_t1=" << b.l_at_t1
     << " l_ec_t0=" << b.l_ec_t0 << " l_ec_t1=" << b.l_ec_t1 << " l_smooth=" << b.l_smooth
     << " total=" << b.total;
  return os.str();
}

double loss_at(const EventVolume& v, const Tensor& flow, double t_ref, Tensor* grad, double scale,
               bool normalize) {
  const WarpedEvents w = warp_events(v, flow, t_ref);
  const std::vector<double> ones(w.size(), 1.0);
  const PolaritySplat num = splat_bilinear(w, w.t);
  const PolaritySplat den = splat_bilinear(w, ones);

  const std::size_t npix = num.pos.data.size();
  std::array<std::vector<double>, 2> g_num{std::vector<double>(npix), std::vector<double>(npix)};
  std::array<std::vector<double>, 2> g_den{std::vector<double>(npix), std::vector<double>(npix)};
  double loss = 0.0;
  std::size_t support = 0;
  for (int c = 0; c < 2; ++c) {
    const Image& n = c == 0 ? num.pos : num.neg;
    const Image& d = c == 0 ? den.pos : den.neg;
    for (std::size_t i = 0; i < npix; ++i) {
      const double denom = d.data[i] + kAvgTimestampEps;
      const double iat = n.data[i] / denom;
      loss += iat * iat;
      g_num[c][i] = 2.0 * iat / denom;
      g_den[c][i] = -2.0 * iat * iat / denom;
      if (d.data[i] > 0.0) ++support;
    }
  }
  if (normalize && support > 0) {
    loss /= static_cast<double>(support);
    scale /= static_cast<double>(support);
  }
  if (grad) {
    const int width = v.sensor.width;
    const int plane = v.sensor.pixels();
    SplatTaps taps;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const int c = w.p[i] > 0 ? 0 : 1;
      const int n = bilinear_taps(w.x[i], w.y[i], w.sensor, taps);
      double gx = 0.0, gy = 0.0;
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = static_cast<std::size_t>(taps[k].y) * width + taps[k].x;
        const double gk = g_num[c][idx] * w.t[i] + g_den[c][idx];
        gx += gk * taps[k].dwdx;
        gy += gk * taps[k].dwdy;
      }
      const double dt = (w.t_ref - w.t[i]) * scale;
      (*grad)[w.src[i]] += dt * gx;
      (*grad)[plane + w.src[i]] += dt * gy;
    }
  }
  return loss;
}

double loss_ec(const EventVolume& v, const Tensor& flow, double t_ref, double alpha, Tensor* grad,
               double scale) {
  if (!(alpha > 0.0)) throw ConfigError("loss_ec: saturation factor must be positive");
  const WarpedEvents w = warp_events(v, flow, t_ref);
  const std::vector<double> ones(w.size(), 1.0);
  const PolaritySplat counts = splat_bilinear(w, ones);
  const double npix = static_cast<double>(v.sensor.pixels());

  std::array<std::vector<double>, 2> expc;
  std::array<double, 2> sums{0.0, 0.0};
  for (int c = 0; c < 2; ++c) {
    const Image& img = c == 0 ? counts.pos : counts.neg;
    expc[c].resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      expc[c][i] = std::exp(-alpha * img.data[i]);
      sums[c] += expc[c][i];
    }
  }
  const double loss = npix / sums[0] + npix / sums[1] - 2.0;
  if (grad) {
    // d/dC(x) of N / S = N * alpha * exp(-alpha C(x)) / S^2
    const std::array<double, 2> coef{npix * alpha / (sums[0] * sums[0]),
                                     npix * alpha / (sums[1] * sums[1])};
    const int width = v.sensor.width;
    const int plane = v.sensor.pixels();
    SplatTaps taps;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const int c = w.p[i] > 0 ? 0 : 1;
      const int n = bilinear_taps(w.x[i], w.y[i], w.sensor, taps);
      double gx = 0.0, gy = 0.0;
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = static_cast<std::size_t>(taps[k].y) * width + taps[k].x;
        const double gk = coef[c] * expc[c][idx];
        gx += gk * taps[k].dwdx;
        gy += gk * taps[k].dwdy;
      }
      const double dt = (w.t_ref - w.t[i]) * scale;
      (*grad)[w.src[i]] += dt * gx;
      (*grad)[plane + w.src[i]] += dt * gy;
    }
  }
  return loss;
}

double loss_smooth(const Tensor& flow, double gamma, double eps, Tensor* grad, double scale) {
  if (flow.ndim() != 3 || flow.channels() != 2) {
    throw ShapeError("loss_smooth: expected 2 x H x W flow, got " + shape_str(flow.shape()));
  }
  const int h = flow.height();
  const int w = flow.width();
  const double eps2 = eps * eps;
  struct Dir {
    int dy, dx;
  };
  constexpr std::array<Dir, 4> dirs{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};

  int active = 0;
  for (const Dir& d : dirs) {
    if (h - d.dy > 0 && w - std::abs(d.dx) > 0) ++active;
  }
  if (active == 0) return 0.0;

  double loss = 0.0;
  for (const Dir& d : dirs) {
    const int rows = h - d.dy;
    const int cols = w - std::abs(d.dx);
    if (rows <= 0 || cols <= 0) continue;
    const double weight = 1.0 / (static_cast<double>(rows) * cols * active);
    const int x_begin = d.dx < 0 ? -d.dx : 0;
    const int x_end = d.dx > 0 ? w - d.dx : w;
    for (int c = 0; c < 2; ++c) {
      for (int y = 0; y < rows; ++y) {
        for (int x = x_begin; x < x_end; ++x) {
          const double z = flow.at(c, y, x) - flow.at(c, y + d.dy, x + d.dx);
          const double base = z * z + eps2;
          const double pm1 = std::pow(base, gamma - 1.0);
          loss += weight * pm1 * base;
          if (grad) {
            const double g = scale * weight * 2.0 * gamma * z * pm1;
            grad->at(c, y, x) += g;
            grad->at(c, y + d.dy, x + d.dx) -= g;
          }
        }
      }
    }
  }
  return loss;
}

LossBreakdown loss_hmc(const EventVolume& v, const Tensor& flow, const LossConfig& cfg, Tensor* grad) {
  cfg.validate();
  LossBreakdown b;
  if (!flow.all_finite()) {
    // Warping would index with non-finite positions; report a non-finite loss instead.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    b.l_at_t0 = b.l_at_t1 = b.l_ec_t0 = b.l_ec_t1 = b.l_smooth = b.total = nan;
    return b;
  }
  b.l_at_t0 = loss_at(v, flow, 0.0, grad, 1.0, cfg.normalize_at);
  b.l_at_t1 = loss_at(v, flow, 1.0, grad, 1.0, cfg.normalize_at);
  if (cfg.lambda1 != 0.0) {
    b.l_ec_t0 = loss_ec(v, flow, 0.0, cfg.alpha, grad, cfg.lambda1);
    b.l_ec_t1 = loss_ec(v, flow, 1.0, cfg.alpha, grad, cfg.lambda1);
  } else {
    b.l_ec_t0 = loss_ec(v, flow, 0.0, cfg.alpha);
    b.l_ec_t1 = loss_ec(v, flow, 1.0, cfg.alpha);
  }
  b.l_smooth = loss_smooth(flow, cfg.charbonnier_gamma, cfg.charbonnier_eps,
                           cfg.lambda2 != 0.0 ? grad : nullptr, cfg.lambda2);
  b.total = (b.l_at_t0 + b.l_at_t1) + cfg.lambda1 * (b.l_ec_t0 + b.l_ec_t1) + cfg.lambda2 * b.l_smooth;
  return b;
}

ag::Var hmc_loss(const ag::Var& flow, const EventVolume& v, const LossConfig& cfg,
                 LossBreakdown* breakdown) {
  const bool need_grad = ag::grad_enabled() && flow.requires_grad();
  Tensor grad;
  if (need_grad) grad = Tensor::zeros_like(flow.value());
  const LossBreakdown b = loss_hmc(v, flow.value(), cfg, need_grad ? &grad : nullptr);
  if (breakdown) *breakdown = b;
  return ag::make_op(Tensor({1}, b.total), {flow}, [grad = std::move(grad)](ag::Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const double go = n.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * grad[i];
  });
}

void write_loss_csv_header(std::ostream& os) {
  os << "step,l_at_t0,l_at_t1,l_ec_t0,l_ec_t1,l_smooth,total\n";
}

void write_loss_csv_row(std::ostream& os, long step, const LossBreakdown& b) {
  os << step << std::setprecision(10) << ',' << b.l_at_t0 << ',' << b.l_at_t1 << ',' << b.l_ec_t0
     << ',' << b.l_ec_t1 << ',' << b.l_smooth << ',' << b.total << '\n';
}

}  // namespace evflow
