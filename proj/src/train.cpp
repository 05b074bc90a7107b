#include "evflow/train.hpp"

#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "evflow/errors.hpp"

namespace evflow {

namespace {

void check_consecutive(std::span<const EventVolume> volumes) {
  if (volumes.empty()) throw ConfigError("training sequence has no volumes");
  for (std::size_t k = 0; k + 1 < volumes.size(); ++k) {
    const EventVolume& a = volumes[k];
    const EventVolume& b = volumes[k + 1];
    const double tol = 1e-9 * std::max(1.0, std::abs(a.t_end));
    if (b.t_start < a.t_end - tol) {
      throw OrderingError("volumes " + std::to_string(k) + " and " + std::to_string(k + 1) + " overlap");
    }
    if (b.t_start < a.t_start) throw OrderingError("volumes are not in temporal order");
  }
}

Var full_resolution(const Var& flow, int h, int w) {
  const int fw = flow.value().width();
  if (fw == w) return flow;
  return ag::affine(ag::resize_bilinear(flow, h, w), static_cast<double>(w) / fw, 0.0);
}

Var step_loss(const FlowPyramid& pyr, const EventVolume& v, const LossConfig& cfg, LossBreakdown& out) {
  Var loss = hmc_loss(pyr.full(), v, cfg, &out);
  if (!cfg.multiscale) return loss;
  const int h = v.sensor.height;
  const int w = v.sensor.width;
  for (int l = 0; l < 3; ++l) {
    LossBreakdown b;
    loss = ag::add(loss, hmc_loss(full_resolution(pyr.flow[l], h, w), v, cfg, &b));
    out += b;
  }
  return loss;
}

}  // namespace

std::vector<LossBreakdown> accumulate_sequence_gradients(const Model& model, std::span<const EventVolume> volumes,
                                                         const LossConfig& loss, double scale) {
  check_consecutive(volumes);
  ModelState state;
  std::vector<LossBreakdown> steps;
  Var total;
  for (std::size_t k = 0; k < volumes.size(); ++k) {
    const EventVolume v = normalize_timestamps(volumes[k]);
    const FlowPyramid pyr = model.step(count_image(v).to_tensor(), state);
    LossBreakdown b;
    const Var l = step_loss(pyr, v, loss, b);
    if (!b.finite()) {
      throw NumericalError("non-finite loss at step " + std::to_string(k) + ": " + to_string(b));
    }
    steps.push_back(b);
    total = total.defined() ? ag::add(total, l) : l;
  }
  if (ag::grad_enabled()) {
    ag::backward(ag::affine(total, scale / static_cast<double>(volumes.size()), 0.0));
  }
  return steps;
}

static LossBreakdown mean_of(const std::vector<LossBreakdown>& steps) {
  LossBreakdown m;
  for (const auto& b : steps) m += b;
  if (!steps.empty()) m *= 1.0 / static_cast<double>(steps.size());
  return m;
}

LossBreakdown train_sequence(const Model& model, Adam& optimizer, std::span<const EventVolume> volumes,
                             const LossConfig& loss) {
  optimizer.zero_grad();
  const LossBreakdown mean = mean_of(accumulate_sequence_gradients(model, volumes, loss));
  optimizer.step();
  return mean;
}

LossBreakdown sequence_loss(const Model& model, std::span<const EventVolume> volumes, const LossConfig& loss) {
  ag::NoGradGuard guard;
  return mean_of(accumulate_sequence_gradients(model, volumes, loss));
}

std::vector<Tensor> infer_sequence(const Model& model, std::span<const EventVolume> volumes) {
  ag::NoGradGuard guard;
  ModelState state;
  std::vector<Tensor> flows;
  for (const EventVolume& raw : volumes) {
    const EventVolume v = normalize_timestamps(raw);
    flows.push_back(model.step(count_image(v).to_tensor(), state).full().value());
  }
  return flows;
}

MetricReport evaluate(const Model& model, std::span<const Sequence> dataset, int interval_multiplier,
                      bool rsat_both_ends) {
  MetricReport report;
  for (const Sequence& raw : dataset) {
    const Sequence seq = with_interval_multiplier(raw, interval_multiplier);
    const std::vector<Tensor> flows = infer_sequence(model, seq.volumes);
    for (std::size_t k = 0; k < seq.volumes.size(); ++k) {
      const EventVolume v = normalize_timestamps(seq.volumes[k]);
      MetricRow row;
      row.sequence = seq.name;
      row.volume_index = static_cast<int>(k);
      if (v.events.empty()) continue;
      if (seq.has_ground_truth()) {
        const EvalMask mask = make_eval_mask(seq.ground_truth[k], v);
        if (mask.count() > 0) {
          row.aee = aee(flows[k], seq.ground_truth[k], mask);
          row.outlier_pct = outlier_rate(flows[k], seq.ground_truth[k], mask);
        }
      }
      row.fwl = fwl(v, flows[k]);
      row.rsat = rsat(v, flows[k], rsat_both_ends);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::vector<Sequence> held_out_set(const TrainConfig& cfg) {
  std::vector<Sequence> out;
  for (int i = 0; i < cfg.data.eval_sequences; ++i) {
    out.push_back(make_synthetic_sequence(cfg.data, cfg.sequence_length, cfg.seed, Split::held_out, i));
  }
  return out;
}

Model make_model(const TrainConfig& cfg) {
  ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  return Model(mc);
}

Adam make_optimizer(const TrainConfig& cfg, const Model& model) {
  AdamConfig a = cfg.adam;
  a.lr = cfg.learning_rate;
  return Adam(model.parameters(), a);
}

TrainResult train(const TrainConfig& cfg, Model& model, Adam& optimizer,
                  const std::function<void(const TrainProgress&)>& on_update) {
  cfg.validate();
  TrainResult result;
  long update = optimizer.steps();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int first = 0; first < cfg.data.sequences; first += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, cfg.data.sequences - first);
      optimizer.zero_grad();
      std::vector<LossBreakdown> means;
      for (int b = 0; b < count; ++b) {
        const Sequence seq =
            make_synthetic_sequence(cfg.data, cfg.sequence_length, cfg.seed, Split::train, first + b);
        means.push_back(mean_of(accumulate_sequence_gradients(model, seq.volumes, cfg.loss, 1.0 / count)));
      }
      optimizer.step();
      TrainProgress p{++update, mean_of(means)};
      result.curve.push_back(p.mean);
      if (on_update) on_update(p);
    }
  }
  return result;
}

// --- checkpoints -----------------------------------------------------------

namespace {

constexpr uint32_t kCheckpointVersion = 1;

void put_tensor(std::ostream& os, const Tensor& t) {
  binio::put<uint32_t>(os, static_cast<uint32_t>(t.ndim()));
  for (int d : t.shape()) binio::put<int32_t>(os, d);
  for (double v : t.values()) binio::put<double>(os, v);
}

Tensor get_tensor(std::istream& is) {
  const uint32_t nd = binio::get<uint32_t>(is);
  if (nd > 8) throw IoError("checkpoint: implausible tensor rank " + std::to_string(nd));
  std::vector<int> shape(nd);
  std::size_t n = 1;
  for (auto& d : shape) {
    d = binio::get<int32_t>(is);
    if (d < 0) throw IoError("checkpoint: negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  std::vector<double> data(n);
  for (auto& v : data) v = binio::get<double>(is);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, const Model& model,
                     const Adam* optimizer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  binio::put_magic(os, "EVCK");
  binio::put<uint32_t>(os, kCheckpointVersion);
  const std::string text = to_text(cfg);
  binio::put<uint32_t>(os, static_cast<uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  binio::put<uint64_t>(os, config_hash(cfg));
  binio::put<int64_t>(os, optimizer ? optimizer->steps() : 0);
  const auto& params = model.parameters();
  binio::put<uint32_t>(os, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) put_tensor(os, p.value());
  binio::put<uint8_t>(os, optimizer ? 1 : 0);
  if (optimizer) {
    for (const auto& m : optimizer->first_moments()) put_tensor(os, m);
    for (const auto& v : optimizer->second_moments()) put_tensor(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  binio::expect_magic(is, "EVCK", path.string());
  const uint32_t version = binio::get<uint32_t>(is);
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t len = binio::get<uint32_t>(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw IoError("checkpoint: truncated configuration");
  std::istringstream cfg_stream(text);
  Checkpoint ck;
  ck.config = train_config_from(KeyValues::parse(cfg_stream, path.string() + " (embedded config)"));
  ck.config_hash = binio::get<uint64_t>(is);
  if (ck.config_hash != config_hash(ck.config)) throw IoError("checkpoint: configuration hash mismatch");
  ck.step = binio::get<int64_t>(is);
  const uint32_t n = binio::get<uint32_t>(is);
  for (uint32_t i = 0; i < n; ++i) ck.parameters.push_back(get_tensor(is));
  if (binio::get<uint8_t>(is)) {
    for (uint32_t i = 0; i < n; ++i) ck.first_moments.push_back(get_tensor(is));
    for (uint32_t i = 0; i < n; ++i) ck.second_moments.push_back(get_tensor(is));
  }
  return ck;
}

void restore(const Checkpoint& ck, Model& model, Adam* optimizer) {
  const auto& params = model.parameters();
  if (params.size() != ck.parameters.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(ck.parameters.size()) + " parameters, model has " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var p = params[i];
    require_same_shape(p.value(), ck.parameters[i], "checkpoint parameter " + std::to_string(i));
    p.mutable_value() = ck.parameters[i];
  }
  if (!optimizer) return;
  if (ck.first_moments.empty()) throw IoError("checkpoint has no optimizer state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    optimizer->first_moments()[i] = ck.first_moments[i];
    optimizer->second_moments()[i] = ck.second_moments[i];
  }
  optimizer->set_steps(ck.step);
}

}  // namespace evflow
