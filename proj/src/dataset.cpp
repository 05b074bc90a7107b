#include "evflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <random>
#include <sstream>

#include "evflow/errors.hpp"
#include "evflow/event_io.hpp"

namespace evflow {

namespace fs = std::filesystem;

std::vector<EventVolume> slice_fixed(std::span<const Event> events, double t0, double interval, int count,
                                     SensorSize sensor) {
  if (!(interval > 0.0)) throw DegenerateIntervalError("slice_fixed: interval must be positive");
  std::vector<EventVolume> out(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k) {
    out[k].t_start = t0 + k * interval;
    out[k].t_end = t0 + (k + 1) * interval;
    out[k].sensor = sensor;
  }
  double last = -std::numeric_limits<double>::infinity();
  for (const Event& e : events) {
    if (e.t < last) throw OrderingError("slice_fixed: events are not sorted by timestamp");
    last = e.t;
    const double rel = (e.t - t0) / interval;
    if (rel < 0.0) continue;
    const auto k = static_cast<long>(std::floor(rel + 1e-9));
    if (k >= count) break;
    out[static_cast<std::size_t>(k)].events.push_back(e);
  }
  return out;
}

Sequence make_synthetic_sequence(const DataConfig& data, int volumes, uint64_t seed, Split split, int index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(split), static_cast<uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(-data.max_flow, data.max_flow);
  double u = 0.0, v = 0.0;
  do {
    u = uni(rng);
    v = uni(rng);
  } while (std::hypot(u, v) > data.max_flow);

  TranslationScene ts = data.scene;
  ts.volumes = volumes;
  const SceneSpec spec = make_translation_scene(ts, u, v, rng);
  const Scene scene = generate(spec);

  Sequence out;
  std::ostringstream name;
  name << (split == Split::train ? "train_" : "heldout_") << std::setw(4) << std::setfill('0') << index;
  out.name = name.str();
  out.flow_u = u;
  out.flow_v = v;
  out.volumes = slice_fixed(scene.events, 0.0, ts.interval, volumes, ts.sensor);
  for (int k = 0; k < volumes; ++k) {
    out.ground_truth.push_back(scene.ground_truth(k * ts.interval, (k + 1) * ts.interval));
  }
  return out;
}

Sequence with_interval_multiplier(const Sequence& seq, int factor) {
  if (factor < 1) throw ConfigError("interval multiplier must be >= 1");
  Sequence out;
  out.name = seq.name;
  out.flow_u = seq.flow_u * factor;
  out.flow_v = seq.flow_v * factor;
  out.volumes = merge_volumes(seq.volumes, factor);
  if (!seq.has_ground_truth()) return out;
  for (std::size_t k = 0; k < out.volumes.size(); ++k) {
    const GroundTruthFlow& first = seq.ground_truth[k * factor];
    const int h = first.u.height();
    const int w = first.u.width();
    GroundTruthFlow merged{Tensor({2, h, w}), std::vector<uint8_t>(first.valid.size(), 0)};
    std::vector<int> n(first.valid.size(), 0);
    for (int j = 0; j < factor; ++j) {
      const GroundTruthFlow& part = seq.ground_truth[k * factor + j];
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!part.is_valid(y, x)) continue;
          merged.u.at(0, y, x) += part.u.at(0, y, x);
          merged.u.at(1, y, x) += part.u.at(1, y, x);
          ++n[static_cast<std::size_t>(y) * w + x];
        }
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int c = n[static_cast<std::size_t>(y) * w + x];
        if (c == 0) continue;
        merged.u.at(0, y, x) *= static_cast<double>(factor) / c;
        merged.u.at(1, y, x) *= static_cast<double>(factor) / c;
        merged.valid[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
    out.ground_truth.push_back(std::move(merged));
  }
  return out;
}

namespace {

std::string gt_name(std::size_t k) {
  std::ostringstream os;
  os << "gt_" << std::setw(4) << std::setfill('0') << k << ".flo";
  return os.str();
}

}  // namespace

void save_sequence(const fs::path& dir, const Sequence& seq, bool binary) {
  if (seq.volumes.empty()) throw ConfigError("save_sequence: sequence has no volumes");
  fs::create_directories(dir);
  const EventVolume& first = seq.volumes.front();
  {
    std::ofstream meta(dir / "meta.cfg");
    if (!meta) throw IoError("cannot write " + (dir / "meta.cfg").string());
    meta << std::setprecision(17);
    meta << "data.height = " << first.sensor.height << '\n'
         << "data.width = " << first.sensor.width << '\n'
         << "data.t0 = " << first.t_start << '\n'
         << "data.interval = " << first.t_end - first.t_start << '\n'
         << "data.volumes = " << seq.volumes.size() << '\n'
         << "data.flow_u = " << seq.flow_u << '\n'
         << "data.flow_v = " << seq.flow_v << '\n';
  }
  EventStream stream{first.sensor, {}};
  for (const auto& v : seq.volumes) {
    if (v.normalized) throw ConfigError("save_sequence: volumes must not be normalized");
    stream.events.insert(stream.events.end(), v.events.begin(), v.events.end());
  }
  save_events(dir / (binary ? "events.bin" : "events.txt"), stream);
  for (std::size_t k = 0; k < seq.ground_truth.size(); ++k) save_flow(dir / gt_name(k), seq.ground_truth[k]);
}

Sequence load_sequence(const fs::path& dir) {
  const KeyValues meta = KeyValues::load(dir / "meta.cfg");
  const SensorSize sensor{meta.get_int("data.height", 0), meta.get_int("data.width", 0)};
  if (sensor.height <= 0 || sensor.width <= 0) throw ConfigError(dir.string() + ": missing sensor size");
  const double interval = meta.get_double("data.interval", 0.0);
  const int volumes = meta.get_int("data.volumes", 0);
  if (volumes < 1) throw ConfigError(dir.string() + ": data.volumes must be >= 1");
  const fs::path bin = dir / "events.bin";
  const fs::path events_path = fs::exists(bin) ? bin : dir / "events.txt";
  const EventStream stream = load_events(events_path, sensor);
  if (!(stream.sensor == sensor)) throw ShapeError(dir.string() + ": event file sensor size differs from meta.cfg");

  Sequence seq;
  seq.name = dir.filename().string();
  seq.flow_u = meta.get_double("data.flow_u", 0.0);
  seq.flow_v = meta.get_double("data.flow_v", 0.0);
  seq.volumes = slice_fixed(stream.events, meta.get_double("data.t0", 0.0), interval, volumes, sensor);
  if (fs::exists(dir / gt_name(0))) {
    for (int k = 0; k < volumes; ++k) {
      GroundTruthFlow gt = load_flow(dir / gt_name(static_cast<std::size_t>(k)));
      if (!(gt.sensor() == sensor)) throw ShapeError(dir.string() + ": ground truth size differs from meta.cfg");
      seq.ground_truth.push_back(std::move(gt));
    }
  }
  return seq;
}

std::vector<Sequence> load_dataset(const fs::path& root) {
  if (fs::exists(root / "meta.cfg")) return {load_sequence(root)};
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.cfg")) dirs.push_back(entry.path());
  }
  if (dirs.empty()) throw IoError("no sequence directories under " + root.string());
  std::sort(dirs.begin(), dirs.end());
  std::vector<Sequence> out;
  for (const auto& d : dirs) out.push_back(load_sequence(d));
  return out;
}

}  // namespace evflow
