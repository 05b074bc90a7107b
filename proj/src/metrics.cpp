#include "evflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "evflow/errors.hpp"
#include "evflow/loss.hpp"
#include "evflow/motion_comp.hpp"

namespace evflow {

namespace {

void check_pred(const Tensor& pred, const GroundTruthFlow& gt, const EvalMask& mask) {
  require_same_shape(pred, gt.u, "metric");
  if (mask.sensor.height != pred.height() || mask.sensor.width != pred.width()) {
    throw ShapeError("metric: mask does not match flow size");
  }
}

double count_variance(const EventVolume& v, const Tensor& flow) {
  const IWE iwe = plain_count_iwe(v, flow, 1.0);
  const std::size_t n = iwe.pos.data.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += iwe.pos.data[i] + iwe.neg.data[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = iwe.pos.data[i] + iwe.neg.data[i] - mean;
    var += d * d;
  }
  return var / static_cast<double>(n);
}

}  // namespace

int EvalMask::count() const { return static_cast<int>(std::count(valid.begin(), valid.end(), uint8_t{1})); }

EvalMask make_eval_mask(const GroundTruthFlow& gt, const EventVolume& v) {
  EvalMask m{gt.sensor(), std::vector<uint8_t>(gt.valid.size(), 0)};
  for (const Event& e : v.events) {
    const std::size_t idx = static_cast<std::size_t>(e.y) * m.sensor.width + e.x;
    if (gt.valid[idx]) m.valid[idx] = 1;
  }
  return m;
}

EvalMask full_mask(SensorSize sensor) {
  return EvalMask{sensor, std::vector<uint8_t>(static_cast<std::size_t>(sensor.pixels()), 1)};
}

double aee(const Tensor& pred, const GroundTruthFlow& gt, const EvalMask& mask) {
  check_pred(pred, gt, mask);
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!mask(y, x)) continue;
      sum += std::hypot(pred.at(0, y, x) - gt.u.at(0, y, x), pred.at(1, y, x) - gt.u.at(1, y, x));
      ++n;
    }
  }
  if (n == 0) throw UndefinedMetricError("aee: evaluation mask is empty");
  return sum / n;
}

double outlier_rate(const Tensor& pred, const GroundTruthFlow& gt, const EvalMask& mask, double abs_px,
                    double rel) {
  check_pred(pred, gt, mask);
  int outliers = 0;
  int n = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!mask(y, x)) continue;
      const double ee =
          std::hypot(pred.at(0, y, x) - gt.u.at(0, y, x), pred.at(1, y, x) - gt.u.at(1, y, x));
      const double mag = std::hypot(gt.u.at(0, y, x), gt.u.at(1, y, x));
      if (ee > abs_px && ee > rel * mag) ++outliers;
      ++n;
    }
  }
  if (n == 0) throw UndefinedMetricError("outlier_rate: evaluation mask is empty");
  return 100.0 * outliers / n;
}

double fwl(const EventVolume& v, const Tensor& flow) {
  const double base = count_variance(v, Tensor::zeros_like(flow));
  if (!(base > 0.0)) throw UndefinedMetricError("fwl: unwarped IWE has zero variance");
  return count_variance(v, flow) / base;
}

double rsat(const EventVolume& v, const Tensor& flow, bool both_ends) {
  const Tensor zero = Tensor::zeros_like(flow);
  double num = loss_at(v, flow, 1.0, nullptr, 1.0, true);
  double den = loss_at(v, zero, 1.0, nullptr, 1.0, true);
  if (both_ends) {
    num += loss_at(v, flow, 0.0, nullptr, 1.0, true);
    den += loss_at(v, zero, 0.0, nullptr, 1.0, true);
  }
  if (!(den > 0.0)) throw UndefinedMetricError("rsat: unwarped average-timestamp image is zero");
  return num / den;
}

MetricRow MetricReport::summary() const {
  MetricRow s;
  s.sequence = "mean";
  s.volume_index = -1;
  double a = 0, o = 0;
  int na = 0;
  for (const auto& r : rows) {
    if (r.aee) {
      a += *r.aee;
      o += r.outlier_pct.value_or(0.0);
      ++na;
    }
    s.fwl += r.fwl;
    s.rsat += r.rsat;
  }
  if (na > 0) {
    s.aee = a / na;
    s.outlier_pct = o / na;
  }
  if (!rows.empty()) {
    s.fwl /= static_cast<double>(rows.size());
    s.rsat /= static_cast<double>(rows.size());
  }
  return s;
}

void write_report_csv(std::ostream& os, const MetricReport& report) {
  auto opt = [&os](const std::optional<double>& v) {
    if (v) os << *v;
  };
  os << "sequence,volume_index,aee,outlier_pct,fwl,rsat\n" << std::setprecision(8);
  auto row = [&](const MetricRow& r, bool summary) {
    os << r.sequence << ',';
    if (!summary) os << r.volume_index;
    os << ',';
    opt(r.aee);
    os << ',';
    opt(r.outlier_pct);
    os << ',' << r.fwl << ',' << r.rsat << '\n';
  };
  for (const auto& r : report.rows) row(r, false);
  row(report.summary(), true);
}

}  // namespace evflow
