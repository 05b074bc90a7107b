#pragma once

#include <cstdint>
#include <vector>

#include "evflow/autograd.hpp"

namespace evflow {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<ag::Var> params, AdamConfig cfg);

  // Applies one update from the accumulated gradients (missing grads count as 0).
  void step();
  void zero_grad();

  const AdamConfig& config() const { return cfg_; }
  int64_t steps() const { return t_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps(int64_t t) { t_ = t; }

 private:
  std::vector<ag::Var> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
};

}  // namespace evflow
