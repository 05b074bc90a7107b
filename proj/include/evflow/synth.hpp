#pragma once

// Synthetic event scenes: point particles moving at constant velocity emit
// events at a fixed rate along their path, which gives exact ground-truth flow.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

#include "evflow/event.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

struct Particle {
  double x0 = 0.0;  // column at t = 0 (sub-pixel)
  double y0 = 0.0;  // row at t = 0
  double vx = 0.0;  // px / s
  double vy = 0.0;
  int8_t polarity = 1;
  bool alternate_polarity = false;
};

enum class EmissionTiming { uniform, poisson };
enum class Quantization { nearest, dithered };

struct SceneSpec {
  SensorSize sensor;
  std::vector<Particle> particles;
  double duration = 1.0;
  double event_rate = 100.0;          // events per particle per second
  double contrast_threshold = 0.2;    // provenance only; emission is rate based
  uint64_t seed = 0;
  EmissionTiming timing = EmissionTiming::uniform;
  Quantization quantization = Quantization::nearest;
};

// Flow in pixels per interval on a 2 x H x W grid (channel 0 horizontal).
struct GroundTruthFlow {
  Tensor u;
  std::vector<uint8_t> valid;  // H*W, row-major

  SensorSize sensor() const { return {u.height(), u.width()}; }
  bool is_valid(int y, int x) const { return valid[static_cast<std::size_t>(y) * u.width() + x] != 0; }
  int valid_count() const;
};

class GroundTruthFactory {
 public:
  GroundTruthFactory() = default;
  explicit GroundTruthFactory(SceneSpec spec) : spec_(std::move(spec)) {}

  // u = v * (t_end - t_start) on every pixel a particle visits in [t_start, t_end).
  // Pixels visited by several particles hold the mean of their flows.
  GroundTruthFlow operator()(double t_start, double t_end) const;

 private:
  SceneSpec spec_;
};

struct Scene {
  std::vector<Event> events;      // sorted by t
  std::vector<int> source;        // particle index of each event
  GroundTruthFactory ground_truth;
};

// Throws BoundsError naming the first particle that leaves the sensor.
void validate_scene(const SceneSpec& spec);

Scene generate(const SceneSpec& spec);

// A textured translation: `dots` bright blobs moving with one common velocity.
// Each blob is a positive particle on its leading side and a negative particle
// one pixel behind it, as a moving bright dot produces; with bar_length > 1 a
// blob is a row of such pairs spaced one pixel apart across the motion.
struct TranslationScene {
  SensorSize sensor{64, 64};
  int dots = 16;
  int bar_length = 1;        // particles per blob, across the motion
  double interval = 0.1;     // seconds per volume
  int volumes = 10;          // scene duration in volumes
  double event_rate = 80.0;
  EmissionTiming timing = EmissionTiming::uniform;
};

// flow_per_volume is the displacement in pixels over one `interval`.
SceneSpec make_translation_scene(const TranslationScene& cfg, double flow_u, double flow_v,
                                 std::mt19937_64& rng);

void write_flow(std::ostream& os, const GroundTruthFlow& gt);
GroundTruthFlow read_flow(std::istream& is);
void save_flow(const std::filesystem::path& path, const GroundTruthFlow& gt);
GroundTruthFlow load_flow(const std::filesystem::path& path);

}  // namespace evflow
