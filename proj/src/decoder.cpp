#include "evflow/decoder.hpp"

#include <cmath>
#include <string>

#include "evflow/errors.hpp"

namespace evflow {

DecoderConfig DecoderConfig::from_encoder(const EncoderConfig& enc) {
  DecoderConfig d;
  const auto& c = enc.channels;
  d.channels = {c[2], c[1], c[0], c[0]};
  d.kernel = enc.kernel;
  return d;
}

void DecoderParams::collect(std::vector<Var>& out) const {
  for (const auto& u : up) u.collect(out);
  for (const auto& h : head) h.collect(out);
  for (const auto& r : refine) r.collect(out);
}

DecoderParams make_decoder(const DecoderConfig& cfg, const EncoderConfig& enc, std::mt19937_64& rng) {
  DecoderParams p;
  const auto& c = enc.channels;
  // Inputs: R + F4, then D(l-1) + F(5-l) + 2 flow channels.
  const std::array<int, 4> in{2 * c[3], cfg.channels[0] + c[2] + 2, cfg.channels[1] + c[1] + 2,
                              cfg.channels[2] + c[0] + 2};
  for (int l = 0; l < 4; ++l) {
    p.up[l] = make_conv(in[l], cfg.channels[l], cfg.kernel, 1, true, rng);
    p.head[l] = make_conv(cfg.channels[l], 2, cfg.head_kernel, 1, true, rng);
    fill_conv(p.head[l], 0.0);
  }
  for (int l = 0; l < 4; ++l) {
    if (cfg.share_refine_gru && l > 0) {
      p.refine[l] = p.refine[0];
    } else {
      p.refine[l] = make_convgru(2, 2, cfg.kernel, rng);
      // Zero candidate biases: zero head and zero prior give exactly zero flow.
      p.refine[l].xh.bias.mutable_value().fill(0.0);
      p.refine[l].hh.bias.mutable_value().fill(0.0);
    }
  }
  return p;
}

Tensor forward_warp_flow(const Tensor& u_prev, int* contributors) {
  if (u_prev.ndim() != 3 || u_prev.channels() != 2) {
    throw ShapeError("forward_warp_flow: expected 2 x H x W flow, got " + shape_str(u_prev.shape()));
  }
  const int h = u_prev.height();
  const int w = u_prev.width();
  Tensor out({2, h, w});
  std::vector<int> hits(static_cast<std::size_t>(h) * w, 0);
  int count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double du = u_prev.at(0, y, x);
      const double dv = u_prev.at(1, y, x);
      const double fx = std::floor(x + du + 0.5);
      const double fy = std::floor(y + dv + 0.5);
      if (!(fx >= 0 && fx < w && fy >= 0 && fy < h)) continue;
      const int tx = static_cast<int>(fx);
      const int ty = static_cast<int>(fy);
      out.at(0, ty, tx) += du;
      out.at(1, ty, tx) += dv;
      ++hits[ty * w + tx];
      ++count;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (const int n = hits[y * w + x]; n > 1) {
        out.at(0, y, x) /= n;
        out.at(1, y, x) /= n;
      }
    }
  }
  if (contributors) *contributors = count;
  return out;
}

Tensor downscale_flow(const Tensor& u, int h, int w) {
  Tensor out = resize_bilinear(u, h, w);
  out *= static_cast<double>(w) / u.width();
  return out;
}

double max_flow_at(const DecoderConfig& cfg, int level_width) {
  return cfg.max_flow_fraction * level_width;
}

Var decoder_block(const DecoderParams& p, int level, const Var& d_prev, const Var& skip,
                  const Var& flow_prev_normalized) {
  std::vector<Var> parts{d_prev, skip};
  if (flow_prev_normalized.defined()) parts.push_back(flow_prev_normalized);
  const Var cat = ag::concat(parts);
  const Var up = ag::resize_bilinear(cat, 2 * cat.value().height(), 2 * cat.value().width());
  return ag::relu(p.up[level](up));
}

FlowPyramid decode(const DecoderConfig& cfg, const DecoderParams& params, const EncoderOutput& enc,
                   const Tensor& warped_prior) {
  const Tensor& f1 = enc.features[0].value();
  const int full_h = f1.height() * 2;
  const int full_w = f1.width() * 2;
  if (warped_prior.ndim() != 3 || warped_prior.channels() != 2 || warped_prior.height() != full_h ||
      warped_prior.width() != full_w) {
    throw ShapeError("decode: prior flow must be 2 x " + std::to_string(full_h) + " x " +
                     std::to_string(full_w) + ", got " + shape_str(warped_prior.shape()));
  }
  FlowPyramid out;
  Var d_prev = enc.residual;
  Var flow_prev_n;
  for (int l = 0; l < 4; ++l) {
    const Var& skip = enc.features[3 - l];
    if (d_prev.value().height() != skip.value().height()) {
      throw ShapeError("decode: level " + std::to_string(l + 1) + " feature size mismatch");
    }
    const Var d = decoder_block(params, l, d_prev, skip, flow_prev_n);
    const int h = d.value().height();
    const int w = d.value().width();
    const double bound = max_flow_at(cfg, w);

    const Var head_n = ag::tanh(params.head[l](d));
    Tensor prior = cfg.prior_flow ? downscale_flow(warped_prior, h, w) : Tensor({2, h, w});
    Tensor prior_n = prior;
    prior_n *= 1.0 / bound;
    const Var flow_n = convgru_step(params.refine[l], head_n, Var::constant(std::move(prior_n)));

    out.features[l] = d;
    out.head[l] = ag::affine(head_n, bound, 0.0);
    out.flow[l] = ag::affine(flow_n, bound, 0.0);
    out.prior[l] = std::move(prior);
    d_prev = d;
    flow_prev_n = flow_n;
  }
  return out;
}

}  // namespace evflow
