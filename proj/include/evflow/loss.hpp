#pragma once

// Unsupervised motion-compensation objective on the full-resolution flow:
// average-timestamp sharpness (L_AT), exponential-count dispersion (L_EC),
// and a Charbonnier smoothness prior, each with an analytic flow gradient.

#include <iosfwd>
#include <string>

#include "evflow/autograd.hpp"
#include "evflow/event.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

struct LossConfig {
  double alpha = 0.6;     // saturation factor of the exponential-count IWE
  double lambda1 = 1.0;   // L_EC weight
  double lambda2 = 0.001; // smoothness weight
  double charbonnier_gamma = 0.45;
  double charbonnier_eps = 1e-3;
  bool multiscale = false;  // also supervise upsampled u1..u3
  bool normalize_at = true; // divide L_AT by the number of pixels that received events

  void validate() const;
};

struct LossBreakdown {
  double l_at_t0 = 0, l_at_t1 = 0;
  double l_ec_t0 = 0, l_ec_t1 = 0;
  double l_smooth = 0;
  double total = 0;

  bool finite() const;
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator*=(double s);
};

std::string to_string(const LossBreakdown& b);

// Each loss returns its value; when `grad` is non-null, scale * d(loss)/d(flow)
// is added into it (same 2 x H x W shape as the flow).

// sum_x I_AT,+^2 + sum_x I_AT,-^2 at reference time t_ref. With `normalize`
// the sum is divided by the number of pixels (over both polarities) holding
// splatted mass; that count is piecewise constant and treated as such.
double loss_at(const EventVolume& v, const Tensor& flow, double t_ref, Tensor* grad = nullptr,
               double scale = 1.0, bool normalize = false);

// N / sum I_EC,+ + N / sum I_EC,- - 2, N = H * W.
double loss_ec(const EventVolume& v, const Tensor& flow, double t_ref, double alpha,
               Tensor* grad = nullptr, double scale = 1.0);

// Mean over the right, down, down-right and down-left neighbour pairs of
// rho(du) + rho(dv), rho(z) = (z^2 + eps^2)^gamma. Directions without any pair
// are skipped; a field without pairs has zero loss.
double loss_smooth(const Tensor& flow, double gamma = 0.45, double eps = 1e-3, Tensor* grad = nullptr,
                   double scale = 1.0);

// Full breakdown at reference times 0 and 1; `grad` receives d(total)/d(flow).
LossBreakdown loss_hmc(const EventVolume& v, const Tensor& flow, const LossConfig& cfg,
                       Tensor* grad = nullptr);

// Differentiable wrapper: a scalar node whose backward pushes d(total)/d(flow).
ag::Var hmc_loss(const ag::Var& flow, const EventVolume& v, const LossConfig& cfg,
                 LossBreakdown* breakdown = nullptr);

// CSV logging: "step,l_at_t0,l_at_t1,l_ec_t0,l_ec_t1,l_smooth,total".
void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, long step, const LossBreakdown& b);

}  // namespace evflow
