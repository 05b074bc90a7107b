#pragma once

// Sequential training and stateful evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evflow/config.hpp"
#include "evflow/dataset.hpp"
#include "evflow/loss.hpp"
#include "evflow/metrics.hpp"
#include "evflow/model.hpp"
#include "evflow/optim.hpp"

namespace evflow {

// Runs the model over consecutive volumes from a fresh state, backpropagates
// scale * mean-over-steps of the total loss into the parameter gradients and
// returns the per-step breakdowns. Hidden states carry gradients within the
// sequence; the prior flow is a constant at every step.
// Throws OrderingError on overlapping volumes and NumericalError (with the
// offending breakdown) on a non-finite loss.
std::vector<LossBreakdown> accumulate_sequence_gradients(const Model& model, std::span<const EventVolume> volumes,
                                                         const LossConfig& loss, double scale = 1.0);

// One optimizer update from one sequence. Returns the mean breakdown.
LossBreakdown train_sequence(const Model& model, Adam& optimizer, std::span<const EventVolume> volumes,
                             const LossConfig& loss);

// Mean loss of the current parameters on a sequence, without gradients.
LossBreakdown sequence_loss(const Model& model, std::span<const EventVolume> volumes, const LossConfig& loss);

// Stateful inference: one flow per volume at full resolution.
std::vector<Tensor> infer_sequence(const Model& model, std::span<const EventVolume> volumes);

// Per-volume metrics with states carried through each sequence. Sequences
// without ground truth contribute FWL/RSAT only.
MetricReport evaluate(const Model& model, std::span<const Sequence> dataset, int interval_multiplier = 1,
                      bool rsat_both_ends = false);

// Held-out synthetic sequences of a configuration.
std::vector<Sequence> held_out_set(const TrainConfig& cfg);

struct TrainProgress {
  long update = 0;          // 1-based optimizer update
  LossBreakdown mean;       // mean over the batch
};

struct TrainResult {
  std::vector<LossBreakdown> curve;  // one entry per optimizer update
};

// Trains `model` on cfg.data.sequences synthetic sequences per epoch.
TrainResult train(const TrainConfig& cfg, Model& model, Adam& optimizer,
                  const std::function<void(const TrainProgress&)>& on_update = {});

// Model and optimizer for a configuration (initialisation seeded by cfg.seed).
Model make_model(const TrainConfig& cfg);
Adam make_optimizer(const TrainConfig& cfg, const Model& model);

// Binary checkpoint: parameters, optimizer moments, step counter and the
// configuration with its hash.
struct Checkpoint {
  TrainConfig config;
  uint64_t config_hash = 0;
  int64_t step = 0;
  std::vector<Tensor> parameters;
  std::vector<Tensor> first_moments, second_moments;  // empty without optimizer state
};

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, const Model& model,
                     const Adam* optimizer);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Copies parameters (and optimizer state when given) into live objects.
void restore(const Checkpoint& ckpt, Model& model, Adam* optimizer = nullptr);

}  // namespace evflow
