#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evflow/decoder.hpp"
#include "evflow/encoder.hpp"
#include "evflow/event.hpp"

namespace evflow {

struct ModelConfig {
  EncoderConfig encoder = EncoderConfig::toy();
  DecoderConfig decoder = DecoderConfig::from_encoder(EncoderConfig::toy());
  uint64_t seed = 7;

  // Channels doubling from `base` per layer, with decoder widths derived.
  static ModelConfig with_base_channels(int base);
};

// Everything the network carries from one volume to the next.
struct ModelState {
  RecurrentState recurrent;
  Tensor prior_flow;  // u_{k-1} at full resolution, empty at sequence start
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  // Unique parameter handles in a fixed order.
  const std::vector<Var>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // One timestep: warps the stored prior, encodes, decodes and advances the
  // state. The stored prior is detached.
  FlowPyramid step(const Tensor& count_input, ModelState& state) const;

  const EncoderParams& encoder() const { return enc_; }
  const DecoderParams& decoder() const { return dec_; }
  EncoderParams& encoder() { return enc_; }
  DecoderParams& decoder() { return dec_; }

 private:
  ModelConfig cfg_;
  EncoderParams enc_;
  DecoderParams dec_;
  std::vector<Var> params_;
};

}  // namespace evflow
