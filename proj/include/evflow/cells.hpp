#pragma once

// Convolutional recurrent cells: the standard ConvGRU and the dual-memory
// ST-ConvGRU that fuses the layer's own state S with a routed memory M.

#include <random>
#include <vector>

#include "evflow/autograd.hpp"

namespace evflow {

using ag::Var;

struct ConvParams {
  Var weight;  // out x in x k x k
  Var bias;    // out, or undefined
  int stride = 1;
  int padding = 0;

  int in_channels() const { return weight.value().dim(1); }
  int out_channels() const { return weight.value().dim(0); }
  int kernel() const { return weight.value().dim(2); }

  Var operator()(const Var& x) const { return ag::conv2d(x, weight, bias, stride, padding); }
  void collect(std::vector<Var>& out) const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation for weight and bias.
// Padding is k/2 so stride-1 convolutions keep the spatial size.
ConvParams make_conv(int in, int out, int kernel, int stride, bool bias, std::mt19937_64& rng);

// Sets every weight and bias entry to `value`.
void fill_conv(ConvParams& conv, double value);

struct ConvGRUParams {
  ConvParams xr, hr, xz, hz, hh, xh;

  int input_channels() const { return xr.in_channels(); }
  int hidden_channels() const { return hr.out_channels(); }
  void collect(std::vector<Var>& out) const;
};

ConvGRUParams make_convgru(int in, int hidden, int kernel, std::mt19937_64& rng);

struct STConvGRUParams {
  ConvGRUParams branch_s;
  ConvGRUParams branch_m;  // aliases branch_s when built with share_branches
  ConvParams fo, so, mo;   // output gate
  ConvParams mm, ss;       // 1x1 fusion

  int hidden_channels() const { return branch_s.hidden_channels(); }
  void collect(std::vector<Var>& out) const;
};

STConvGRUParams make_st_convgru(int in, int hidden, int kernel, int gate_kernel, bool share_branches,
                                std::mt19937_64& rng);

// r = sig(Wxr*x + Whr*h), z = sig(Wxz*x + Whz*h), c = tanh(r . (Whh*h) + Wxh*x),
// h' = (1 - z) . h + z . c
Var convgru_step(const ConvGRUParams& p, const Var& x, const Var& h_prev);

struct STConvGRUOutput {
  Var features;  // F = o . tanh(Wmm*M' + Wss*S')
  Var s_new;
  Var m_bar;
};

STConvGRUOutput st_convgru_step(const STConvGRUParams& p, const Var& x, const Var& s_prev,
                                const Var& m_prev);

}  // namespace evflow
