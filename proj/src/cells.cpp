#include "evflow/cells.hpp"

#include <cmath>
#include <string>

#include "evflow/errors.hpp"

namespace evflow {

namespace {

void check_spatial(const Var& x, const Var& h, const char* who) {
  const Tensor& a = x.value();
  const Tensor& b = h.value();
  if (a.ndim() != 3 || b.ndim() != 3) {
    throw ShapeError(std::string(who) + ": expected C x H x W tensors");
  }
  if (a.height() != b.height()) {
    throw ShapeError(std::string(who) + ": height mismatch between input (" +
                     std::to_string(a.height()) + ") and state (" + std::to_string(b.height()) + ")");
  }
  if (a.width() != b.width()) {
    throw ShapeError(std::string(who) + ": width mismatch between input (" +
                     std::to_string(a.width()) + ") and state (" + std::to_string(b.width()) + ")");
  }
}

void check_channels(int got, int want, const char* who, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(who) + ": " + what + " channel mismatch, got " +
                     std::to_string(got) + ", expected " + std::to_string(want));
  }
}

}  // namespace

void ConvParams::collect(std::vector<Var>& out) const {
  out.push_back(weight);
  if (bias.defined()) out.push_back(bias);
}

ConvParams make_conv(int in, int out, int kernel, int stride, bool bias, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w({out, in, kernel, kernel});
  for (double& v : w.values()) v = dist(rng);
  ConvParams c;
  c.weight = Var::parameter(std::move(w));
  if (bias) {
    Tensor b({out});
    for (double& v : b.values()) v = dist(rng);
    c.bias = Var::parameter(std::move(b));
  }
  c.stride = stride;
  c.padding = kernel / 2;
  return c;
}

void fill_conv(ConvParams& conv, double value) {
  conv.weight.mutable_value().fill(value);
  if (conv.bias.defined()) conv.bias.mutable_value().fill(value);
}

void ConvGRUParams::collect(std::vector<Var>& out) const {
  for (const ConvParams* c : {&xr, &hr, &xz, &hz, &hh, &xh}) c->collect(out);
}

ConvGRUParams make_convgru(int in, int hidden, int kernel, std::mt19937_64& rng) {
  ConvGRUParams p;
  p.xr = make_conv(in, hidden, kernel, 1, true, rng);
  p.hr = make_conv(hidden, hidden, kernel, 1, true, rng);
  p.xz = make_conv(in, hidden, kernel, 1, true, rng);
  p.hz = make_conv(hidden, hidden, kernel, 1, true, rng);
  p.hh = make_conv(hidden, hidden, kernel, 1, true, rng);
  p.xh = make_conv(in, hidden, kernel, 1, true, rng);
  return p;
}

void STConvGRUParams::collect(std::vector<Var>& out) const {
  branch_s.collect(out);
  branch_m.collect(out);
  for (const ConvParams* c : {&fo, &so, &mo, &mm, &ss}) c->collect(out);
}

STConvGRUParams make_st_convgru(int in, int hidden, int kernel, int gate_kernel, bool share_branches,
                                std::mt19937_64& rng) {
  STConvGRUParams p;
  p.branch_s = make_convgru(in, hidden, kernel, rng);
  p.branch_m = share_branches ? p.branch_s : make_convgru(in, hidden, kernel, rng);
  p.fo = make_conv(in, hidden, gate_kernel, 1, true, rng);
  p.so = make_conv(hidden, hidden, gate_kernel, 1, true, rng);
  p.mo = make_conv(hidden, hidden, gate_kernel, 1, true, rng);
  p.mm = make_conv(hidden, hidden, 1, 1, true, rng);
  p.ss = make_conv(hidden, hidden, 1, 1, true, rng);
  return p;
}

Var convgru_step(const ConvGRUParams& p, const Var& x, const Var& h_prev) {
  check_spatial(x, h_prev, "convgru_step");
  check_channels(x.value().channels(), p.input_channels(), "convgru_step", "input");
  check_channels(h_prev.value().channels(), p.hidden_channels(), "convgru_step", "hidden");

  const Var r = ag::sigmoid(ag::add(p.xr(x), p.hr(h_prev)));
  const Var z = ag::sigmoid(ag::add(p.xz(x), p.hz(h_prev)));
  const Var candidate = ag::tanh(ag::add(ag::mul(r, p.hh(h_prev)), p.xh(x)));
  return ag::add(ag::mul(ag::affine(z, -1.0, 1.0), h_prev), ag::mul(z, candidate));
}

STConvGRUOutput st_convgru_step(const STConvGRUParams& p, const Var& x, const Var& s_prev,
                                const Var& m_prev) {
  check_spatial(x, s_prev, "st_convgru_step");
  check_spatial(x, m_prev, "st_convgru_step");
  check_channels(m_prev.value().channels(), p.branch_m.hidden_channels(), "st_convgru_step",
                 "memory");
  STConvGRUOutput out;
  out.s_new = convgru_step(p.branch_s, x, s_prev);
  out.m_bar = convgru_step(p.branch_m, x, m_prev);
  const Var o = ag::sigmoid(ag::add(ag::add(p.fo(x), p.so(out.s_new)), p.mo(out.m_bar)));
  out.features = ag::mul(o, ag::tanh(ag::add(p.mm(out.m_bar), p.ss(out.s_new))));
  return out;
}

}  // namespace evflow
