#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "evflow/cells.hpp"
#include "evflow/errors.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace evflow;
using evflow::oracle::conv_at;
using evflow::oracle::gru_oracle;
using evflow::oracle::sig;
using evflow::oracle::st_oracle;
using evflow::testing::random_tensor;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void fill_gru(ConvGRUParams& p, double v) {
  for (ConvParams* c : {&p.xr, &p.hr, &p.xz, &p.hz, &p.hh, &p.xh}) fill_conv(*c, v);
}

Var param(const Tensor& t) { return Var::parameter(t); }

}  // namespace

TEST_CASE("convgru_step matches a per-pixel oracle") {
  std::mt19937_64 rng(21);
  for (int in : {1, 2}) {
    for (int hidden : {1, 2}) {
      const ConvGRUParams p = make_convgru(in, hidden, 3, rng);
      const Tensor x = random_tensor({in, 4, 4}, rng);
      const Tensor h = random_tensor({hidden, 4, 4}, rng);
      const Tensor got = convgru_step(p, Var::constant(x), Var::constant(h)).value();
      CHECK(max_abs_diff(got, gru_oracle(p, x, h)) <= 1e-6);
    }
  }
}

TEST_CASE("st_convgru_step matches a per-pixel oracle") {
  std::mt19937_64 rng(22);
  for (int in : {1, 2}) {
    const int hidden = 2;
    const STConvGRUParams p = make_st_convgru(in, hidden, 3, 3, false, rng);
    const Tensor x = random_tensor({in, 4, 4}, rng);
    const Tensor s = random_tensor({hidden, 4, 4}, rng);
    const Tensor m = random_tensor({hidden, 4, 4}, rng);
    const STConvGRUOutput out = st_convgru_step(p, Var::constant(x), Var::constant(s), Var::constant(m));

    const auto [f, s_new, m_bar] = st_oracle(p, x, s, m);
    CHECK(max_abs_diff(out.s_new.value(), s_new) <= 1e-6);
    CHECK(max_abs_diff(out.m_bar.value(), m_bar) <= 1e-6);
    CHECK(max_abs_diff(out.features.value(), f) <= 1e-6);
  }
}

TEST_CASE("zero-weight ConvGRU halves the state") {
  std::mt19937_64 rng(23);
  ConvGRUParams p = make_convgru(2, 3, 3, rng);
  fill_gru(p, 0.0);
  const Tensor h0 = random_tensor({3, 5, 5}, rng);
  const Tensor x = random_tensor({2, 5, 5}, rng);
  const Tensor h1 = convgru_step(p, Var::constant(x), Var::constant(h0)).value();
  for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h1[i] == doctest::Approx(0.5 * h0[i]));

  const Tensor zero = convgru_step(p, Var::constant(x), Var::constant(Tensor({3, 5, 5}))).value();
  CHECK(zero.max_abs() == 0.0);
}

TEST_CASE("update gate limits") {
  std::mt19937_64 rng(24);
  ConvGRUParams p = make_convgru(1, 2, 3, rng);
  const Tensor x = random_tensor({1, 4, 4}, rng);
  const Tensor h = random_tensor({2, 4, 4}, rng);

  SUBCASE("z saturated at 1 returns the candidate") {
    fill_conv(p.xz, 0.0);
    fill_conv(p.hz, 0.0);
    p.xz.bias.mutable_value().fill(60.0);
    const Tensor got = convgru_step(p, Var::constant(x), Var::constant(h)).value();
    Tensor cand(h.shape());
    for (int c = 0; c < 2; ++c) {
      for (int y = 0; y < 4; ++y) {
        for (int xx = 0; xx < 4; ++xx) {
          const double r = sig(conv_at(p.xr, x, c, y, xx) + conv_at(p.hr, h, c, y, xx));
          cand.at(c, y, xx) = std::tanh(r * conv_at(p.hh, h, c, y, xx) + conv_at(p.xh, x, c, y, xx));
        }
      }
    }
    CHECK(max_abs_diff(got, cand) <= 1e-12);
  }
  SUBCASE("z saturated at 0 keeps the state") {
    fill_conv(p.xz, 0.0);
    fill_conv(p.hz, 0.0);
    p.xz.bias.mutable_value().fill(-60.0);
    const Tensor got = convgru_step(p, Var::constant(x), Var::constant(h)).value();
    CHECK(max_abs_diff(got, h) <= 1e-12);
  }
}

TEST_CASE("ConvGRU output is bounded by the state and one") {
  std::mt19937_64 rng(25);
  const ConvGRUParams p = make_convgru(2, 2, 3, rng);
  for (double scale : {0.5, 3.0}) {
    const Tensor x = random_tensor({2, 6, 6}, rng, -5, 5);
    const Tensor h = random_tensor({2, 6, 6}, rng, -scale, scale);
    const Tensor out = convgru_step(p, Var::constant(x), Var::constant(h)).value();
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i]) <= std::max(std::abs(h[i]), 1.0) + 1e-12);
  }
}

TEST_CASE("ST-ConvGRU state update is the plain cell") {
  std::mt19937_64 rng(26);
  const STConvGRUParams p = make_st_convgru(2, 3, 3, 3, false, rng);
  const Var x = Var::constant(random_tensor({2, 4, 4}, rng));
  const Var s = Var::constant(random_tensor({3, 4, 4}, rng));
  const Var m = Var::constant(random_tensor({3, 4, 4}, rng));
  const Tensor a = st_convgru_step(p, x, s, m).s_new.value();
  const Tensor b = convgru_step(p.branch_s, x, s).value();
  CHECK(a.values().size() == b.values().size());
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST_CASE("ST-ConvGRU with zero fusion kernels outputs zero") {
  std::mt19937_64 rng(27);
  STConvGRUParams p = make_st_convgru(2, 3, 3, 3, false, rng);
  for (ConvParams* c : {&p.fo, &p.so, &p.mo, &p.mm, &p.ss}) fill_conv(*c, 0.0);
  const STConvGRUOutput out = st_convgru_step(p, Var::constant(random_tensor({2, 4, 4}, rng)),
                                              Var::constant(random_tensor({3, 4, 4}, rng)),
                                              Var::constant(random_tensor({3, 4, 4}, rng)));
  CHECK(out.features.value().max_abs() == 0.0);
}

TEST_CASE("ST-ConvGRU features lie strictly inside (-1, 1)") {
  std::mt19937_64 rng(28);
  const STConvGRUParams p = make_st_convgru(2, 4, 3, 3, false, rng);
  const STConvGRUOutput out = st_convgru_step(p, Var::constant(random_tensor({2, 8, 8}, rng, -4, 4)),
                                              Var::constant(random_tensor({4, 8, 8}, rng)),
                                              Var::constant(random_tensor({4, 8, 8}, rng)));
  CHECK(out.features.value().max_abs() < 1.0);
}

TEST_CASE("ST-ConvGRU branches are independent unless shared") {
  std::mt19937_64 rng(29);
  const STConvGRUParams sep = make_st_convgru(2, 2, 3, 3, false, rng);
  CHECK(sep.branch_s.xr.weight.node() != sep.branch_m.xr.weight.node());
  const STConvGRUParams shared = make_st_convgru(2, 2, 3, 3, true, rng);
  CHECK(shared.branch_s.xr.weight.node() == shared.branch_m.xr.weight.node());
  CHECK(sep.mm.kernel() == 1);
  CHECK(sep.ss.kernel() == 1);
  CHECK(sep.fo.kernel() == 3);
}

TEST_CASE("shape errors name the mismatched dimension") {
  std::mt19937_64 rng(30);
  const ConvGRUParams p = make_convgru(2, 3, 3, rng);
  auto message = [&](const Tensor& x, const Tensor& h) {
    try {
      convgru_step(p, Var::constant(x), Var::constant(h));
    } catch (const ShapeError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(Tensor({2, 4, 4}), Tensor({3, 5, 4})).find("height") != std::string::npos);
  CHECK(message(Tensor({2, 4, 4}), Tensor({3, 4, 5})).find("width") != std::string::npos);
  CHECK(message(Tensor({1, 4, 4}), Tensor({3, 4, 4})).find("channel") != std::string::npos);
  CHECK(message(Tensor({2, 4, 4}), Tensor({2, 4, 4})).find("channel") != std::string::npos);
}

TEST_CASE("ConvGRU parameter gradients match finite differences") {
  std::mt19937_64 rng(31);
  const ConvGRUParams p = make_convgru(1, 1, 3, rng);
  const Var x = Var::constant(random_tensor({1, 4, 4}, rng));
  const Var h = param(random_tensor({1, 4, 4}, rng));
  std::vector<Var> params;
  p.collect(params);
  params.push_back(h);
  for (auto& v : params) v.zero_grad();
  ag::backward(ag::sum(convgru_step(p, x, h)));
  auto f = [&] { return convgru_step(p, x, h).value().sum(); };
  for (auto& v : params) {
    const Tensor g = std::as_const(v).grad();
    CHECK(evflow::testing::max_fd_error(f, v.mutable_value(), g) <= 1e-4);
  }
}

TEST_CASE("ST-ConvGRU parameter gradients match finite differences") {
  std::mt19937_64 rng(32);
  const STConvGRUParams p = make_st_convgru(2, 2, 3, 3, false, rng);
  const Var x = Var::constant(random_tensor({2, 4, 4}, rng));
  const Var s = param(random_tensor({2, 4, 4}, rng));
  const Var m = param(random_tensor({2, 4, 4}, rng));
  std::vector<Var> params;
  p.collect(params);
  params.push_back(s);
  params.push_back(m);
  for (auto& v : params) v.zero_grad();
  ag::backward(ag::sum(st_convgru_step(p, x, s, m).features));
  auto f = [&] { return st_convgru_step(p, x, s, m).features.value().sum(); };
  for (auto& v : params) {
    const Tensor g = std::as_const(v).grad();
    CHECK(evflow::testing::max_fd_error(f, v.mutable_value(), g) <= 1e-4);
  }
}
