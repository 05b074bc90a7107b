#pragma once

// Flow-guided decoder. Each of the four decoder modules upsamples its input,
// predicts a bounded flow with a tanh head and refines it with a 2-channel
// ConvGRU whose previous state is the forward-warped flow of the last step.
//
// Flows are 2 x h x w tensors (channel 0 horizontal, channel 1 vertical) in
// pixels of their own resolution per volume interval.

#include <array>
#include <random>

#include "evflow/cells.hpp"
#include "evflow/encoder.hpp"

namespace evflow {

struct DecoderConfig {
  std::array<int, 4> channels{128, 64, 32, 32};  // D1..D4
  int kernel = 3;
  int head_kernel = 1;
  double max_flow_fraction = 0.25;  // flow bound = fraction * level width
  bool prior_flow = true;           // false: refinement sees a zero prior
  bool share_refine_gru = false;

  static DecoderConfig from_encoder(const EncoderConfig& enc);
};

struct DecoderParams {
  std::array<ConvParams, 4> up;        // conv after x2 bilinear upsampling, + ReLU
  std::array<ConvParams, 4> head;      // -> 2 channels, zero initialised
  std::array<ConvGRUParams, 4> refine; // aliases refine[0] when shared

  void collect(std::vector<Var>& out) const;
};

DecoderParams make_decoder(const DecoderConfig& cfg, const EncoderConfig& enc, std::mt19937_64& rng);

struct FlowPyramid {
  std::array<Var, 4> flow;       // u1..u4 at H/8, H/4, H/2, H (pixels at that scale)
  std::array<Var, 4> head;       // tanh-head predictions before refinement (pixels)
  std::array<Tensor, 4> prior;   // downscaled warped prior used at each level (pixels)
  std::array<Var, 4> features;   // D1..D4

  const Var& full() const { return flow[3]; }
};

// Scatter u_prev(x, y) to round((x, y) + u_prev(x, y)); collisions average,
// targets outside the grid are dropped and unreached pixels are zero.
// `contributors` (optional) receives the number of in-bounds sources.
Tensor forward_warp_flow(const Tensor& u_prev, int* contributors = nullptr);

// Bilinear resize of a flow field with its vectors scaled by w / W.
Tensor downscale_flow(const Tensor& u, int h, int w);

double max_flow_at(const DecoderConfig& cfg, int level_width);

// One decoder module's feature path: relu(conv(upsample2(concat(inputs)))).
// `flow_prev` may be undefined (first module).
Var decoder_block(const DecoderParams& p, int level, const Var& d_prev, const Var& skip,
                  const Var& flow_prev_normalized);

FlowPyramid decode(const DecoderConfig& cfg, const DecoderParams& params, const EncoderOutput& enc,
                   const Tensor& warped_prior);

}  // namespace evflow
