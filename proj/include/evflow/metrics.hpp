#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evflow/event.hpp"
#include "evflow/synth.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

// True where ground truth is valid and the volume has at least one event.
struct EvalMask {
  SensorSize sensor;
  std::vector<uint8_t> valid;

  bool operator()(int y, int x) const { return valid[static_cast<std::size_t>(y) * sensor.width + x] != 0; }
  int count() const;
};

EvalMask make_eval_mask(const GroundTruthFlow& gt, const EventVolume& v);
EvalMask full_mask(SensorSize sensor);

// Mean endpoint error over masked pixels. Throws UndefinedMetricError on an empty mask.
double aee(const Tensor& pred, const GroundTruthFlow& gt, const EvalMask& mask);

// Percentage of masked pixels whose endpoint error exceeds both `abs_px` and
// `rel` * |gt|.
double outlier_rate(const Tensor& pred, const GroundTruthFlow& gt, const EvalMask& mask,
                    double abs_px = 3.0, double rel = 0.05);

// Flow warp loss: variance of the polarity-summed count IWE warped by `flow`
// to t = 1 over that of the unwarped one (> 1 means sharper).
double fwl(const EventVolume& v, const Tensor& flow);

// Ratio of squared average timestamps: support-normalized L_AT at `flow` over
// the same at zero flow, at t_ref = 1 (or summed over t_ref = 0 and 1 with
// both_ends).
double rsat(const EventVolume& v, const Tensor& flow, bool both_ends = false);

struct MetricRow {
  std::string sequence;
  int volume_index = 0;
  std::optional<double> aee;
  std::optional<double> outlier_pct;
  double fwl = 0.0;
  double rsat = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  // Means over rows (AEE/outlier over the rows that have them).
  MetricRow summary() const;
};

// CSV: "sequence,volume_index,aee,outlier_pct,fwl,rsat" rows, then a "mean" row.
void write_report_csv(std::ostream& os, const MetricReport& report);

}  // namespace evflow
