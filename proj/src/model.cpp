#include "evflow/model.hpp"

#include <random>
#include <unordered_set>

namespace evflow {

ModelConfig ModelConfig::with_base_channels(int base) {
  ModelConfig m;
  m.encoder.channels = {base, 2 * base, 4 * base, 8 * base};
  m.decoder = DecoderConfig::from_encoder(m.encoder);
  return m;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  std::mt19937_64 rng(cfg.seed);
  enc_ = make_encoder(cfg.encoder, rng);
  dec_ = make_decoder(cfg.decoder, cfg.encoder, rng);
  std::vector<Var> all;
  enc_.collect(all, cfg.encoder);
  dec_.collect(all);
  std::unordered_set<const ag::Node*> seen;
  for (auto& v : all) {
    if (seen.insert(v.node().get()).second) params_.push_back(v);
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value().size();
  return n;
}

FlowPyramid Model::step(const Tensor& count_input, ModelState& state) const {
  const Tensor prior = state.prior_flow.empty()
                           ? Tensor({2, count_input.height(), count_input.width()})
                           : forward_warp_flow(state.prior_flow);
  const EncoderOutput enc = encode(cfg_.encoder, enc_, Var::constant(count_input), state.recurrent);
  FlowPyramid pyr = decode(cfg_.decoder, dec_, enc, prior);
  state.recurrent = enc.state;
  state.prior_flow = pyr.full().value();
  return pyr;
}

}  // namespace evflow
