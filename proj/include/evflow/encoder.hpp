#pragma once

// Feature-enhanced recurrent encoder: four stride-2 encoder modules (the first
// an ST-ConvGRU fed with the previous step's top-layer state, the rest
// ConvGRUs) followed by two residual blocks.

#include <array>
#include <random>

#include "evflow/cells.hpp"

namespace evflow {

struct EncoderConfig {
  std::array<int, 4> channels{32, 64, 128, 256};
  int input_channels = 2;
  int kernel = 3;
  int gate_kernel = 3;          // output-gate kernels of the ST-ConvGRU
  bool st_convgru = true;       // false: layer 1 is a plain ConvGRU
  bool share_st_branches = false;

  static EncoderConfig toy() {
    EncoderConfig c;
    c.channels = {8, 16, 32, 64};
    return c;
  }
  void validate() const;
};

struct ResidualBlock {
  ConvParams first, second;
  // x + second(relu(first(x)))
  Var operator()(const Var& x) const;
};

struct EncoderParams {
  std::array<ConvParams, 4> down;      // stride-2 conv + ReLU per layer
  STConvGRUParams st;                  // layer 1 when st_convgru
  ConvGRUParams gru1;                  // layer 1 otherwise
  std::array<ConvGRUParams, 3> gru;    // layers 2..4
  ConvParams route_up;                 // top-layer state -> layer-1 memory, no bias
  std::array<ResidualBlock, 2> residual;

  void collect(std::vector<Var>& out, const EncoderConfig& cfg) const;
};

EncoderParams make_encoder(const EncoderConfig& cfg, std::mt19937_64& rng);

// Per-layer hidden states carried across timesteps. A default-constructed
// state is the zero-init sentinel used at sequence start.
struct RecurrentState {
  std::array<Var, 4> s;

  bool initialized() const { return s[0].defined(); }
  RecurrentState detached() const;
};

struct EncoderOutput {
  std::array<Var, 4> features;  // F1..F4 at H/2 .. H/16
  Var residual;                 // R at H/16
  Var routed_memory;            // layer-1 M input (zero map at sequence start)
  RecurrentState state;
};

// Throws ConfigError when H or W is not divisible by 16 and ShapeError when a
// carried state does not match the configuration.
EncoderOutput encode(const EncoderConfig& cfg, const EncoderParams& params, const Var& input,
                     const RecurrentState& state);

}  // namespace evflow
