#pragma once

// Event sequences with optional per-volume ground truth, generated on the fly
// from synthetic translation scenes or read from a sequence directory:
//
//   <dir>/meta.cfg          data.height, data.width, data.interval, data.volumes
//   <dir>/events.bin|.txt   the event stream
//   <dir>/gt_0000.flo ...   optional ground-truth flow per volume

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evflow/config.hpp"
#include "evflow/event.hpp"
#include "evflow/synth.hpp"

namespace evflow {

struct Sequence {
  std::string name;
  std::vector<EventVolume> volumes;     // consecutive, unnormalized
  std::vector<GroundTruthFlow> ground_truth;  // empty or one per volume
  double flow_u = 0.0, flow_v = 0.0;    // synthetic translation (px / volume)

  bool has_ground_truth() const { return !ground_truth.empty(); }
};

// Exactly `count` consecutive volumes [t0 + k*interval, t0 + (k+1)*interval).
std::vector<EventVolume> slice_fixed(std::span<const Event> events, double t0, double interval, int count,
                                     SensorSize sensor);

enum class Split : uint64_t { train = 0, held_out = 1 };

// Sequence `index` of a split: a translation drawn uniformly from the disc
// |flow| <= data.max_flow. Depends only on (seed, split, index).
Sequence make_synthetic_sequence(const DataConfig& data, int volumes, uint64_t seed, Split split, int index);

// Merges `factor` consecutive volumes; the ground truth of a merged volume is
// the mean of its parts' valid flows times `factor` (constant-flow scaling),
// valid wherever any part is valid.
Sequence with_interval_multiplier(const Sequence& seq, int factor);

void save_sequence(const std::filesystem::path& dir, const Sequence& seq, bool binary = true);
Sequence load_sequence(const std::filesystem::path& dir);

// All sequence directories below `root` (those holding a meta.cfg), sorted by name.
std::vector<Sequence> load_dataset(const std::filesystem::path& root);

}  // namespace evflow
