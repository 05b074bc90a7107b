#include "evflow/encoder.hpp"

#include <string>

#include "evflow/errors.hpp"

namespace evflow {

void EncoderConfig::validate() const {
  for (int c : channels) {
    if (c <= 0) throw ConfigError("encoder: channel counts must be positive");
  }
  if (input_channels <= 0) throw ConfigError("encoder: input channels must be positive");
  if (kernel % 2 == 0 || gate_kernel % 2 == 0) throw ConfigError("encoder: kernels must be odd");
}

Var ResidualBlock::operator()(const Var& x) const {
  return ag::add(x, second(ag::relu(first(x))));
}

void EncoderParams::collect(std::vector<Var>& out, const EncoderConfig& cfg) const {
  for (const auto& d : down) d.collect(out);
  if (cfg.st_convgru) {
    st.collect(out);
    route_up.collect(out);
  } else {
    gru1.collect(out);
  }
  for (const auto& g : gru) g.collect(out);
  for (const auto& rb : residual) {
    rb.first.collect(out);
    rb.second.collect(out);
  }
}

EncoderParams make_encoder(const EncoderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  EncoderParams p;
  const auto& c = cfg.channels;
  int in = cfg.input_channels;
  for (int l = 0; l < 4; ++l) {
    p.down[l] = make_conv(in, c[l], cfg.kernel, 2, true, rng);
    in = c[l];
  }
  if (cfg.st_convgru) {
    p.st = make_st_convgru(c[0], c[0], cfg.kernel, cfg.gate_kernel, cfg.share_st_branches, rng);
    p.route_up = make_conv(c[3], c[0], cfg.kernel, 1, false, rng);
  } else {
    p.gru1 = make_convgru(c[0], c[0], cfg.kernel, rng);
  }
  for (int l = 1; l < 4; ++l) p.gru[l - 1] = make_convgru(c[l], c[l], cfg.kernel, rng);
  for (auto& rb : p.residual) {
    rb.first = make_conv(c[3], c[3], cfg.kernel, 1, true, rng);
    rb.second = make_conv(c[3], c[3], cfg.kernel, 1, true, rng);
  }
  return p;
}

RecurrentState RecurrentState::detached() const {
  RecurrentState out;
  for (int l = 0; l < 4; ++l) {
    if (s[l].defined()) out.s[l] = s[l].detach();
  }
  return out;
}

EncoderOutput encode(const EncoderConfig& cfg, const EncoderParams& params, const Var& input,
                     const RecurrentState& state) {
  const Tensor& iv = input.value();
  if (iv.ndim() != 3 || iv.channels() != cfg.input_channels) {
    throw ShapeError("encode: expected " + std::to_string(cfg.input_channels) +
                     " x H x W input, got " + shape_str(iv.shape()));
  }
  const int h = iv.height();
  const int w = iv.width();
  if (h % 16 != 0 || w % 16 != 0 || h == 0 || w == 0) {
    throw ConfigError("encode: input size " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by 16");
  }

  std::array<Var, 4> prev;
  for (int l = 0; l < 4; ++l) {
    const int scale = 2 << l;
    const std::vector<int> want{cfg.channels[l], h / scale, w / scale};
    if (state.initialized()) {
      if (!state.s[l].defined() || state.s[l].shape() != want) {
        throw ShapeError("encode: state S" + std::to_string(l + 1) + " has shape " +
                         (state.s[l].defined() ? shape_str(state.s[l].shape()) : "()") +
                         ", expected " + shape_str(want));
      }
      prev[l] = state.s[l];
    } else {
      prev[l] = Var::constant(Tensor(want));
    }
  }

  EncoderOutput out;
  const Var x1 = ag::relu(params.down[0](input));
  if (cfg.st_convgru) {
    if (state.initialized()) {
      const Var up = ag::resize_bilinear(prev[3], h / 2, w / 2);
      out.routed_memory = ag::relu(params.route_up(up));
    } else {
      out.routed_memory = Var::constant(Tensor({cfg.channels[0], h / 2, w / 2}));
    }
    auto st = st_convgru_step(params.st, x1, prev[0], out.routed_memory);
    out.features[0] = st.features;
    out.state.s[0] = st.s_new;
  } else {
    out.features[0] = convgru_step(params.gru1, x1, prev[0]);
    out.state.s[0] = out.features[0];
  }
  for (int l = 1; l < 4; ++l) {
    const Var xl = ag::relu(params.down[l](out.features[l - 1]));
    out.features[l] = convgru_step(params.gru[l - 1], xl, prev[l]);
    out.state.s[l] = out.features[l];
  }
  out.residual = params.residual[1](params.residual[0](out.features[3]));
  return out;
}

}  // namespace evflow
