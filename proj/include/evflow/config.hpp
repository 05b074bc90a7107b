#pragma once

// Flat "key = value" configuration files ('#' starts a comment) with
// namespaced keys such as train.lr, loss.alpha and model.base_channels.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "evflow/loss.hpp"
#include "evflow/model.hpp"
#include "evflow/optim.hpp"
#include "evflow/synth.hpp"

namespace evflow {

class KeyValues {
 public:
  static KeyValues parse(std::istream& is, const std::string& origin = "<config>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Typed getters; a malformed value throws ConfigError naming the key.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

// Synthetic translation data used for training and held-out evaluation.
struct DataConfig {
  TranslationScene scene;
  double max_flow = 3.0;   // |flow| bound in px per volume
  int sequences = 500;     // training sequences per epoch
  int eval_sequences = 20; // held-out sequences
};

struct TrainConfig {
  int sequence_length = 10;
  double learning_rate = 1e-4;
  int epochs = 100;
  int batch_size = 1;
  std::string profile = "toy";  // toy: channels (8,16,32,64); full: (32,64,128,256)
  uint64_t seed = 7;
  AdamConfig adam;
  LossConfig loss;
  ModelConfig model;
  DataConfig data;
  int log_every = 10;

  // Toy acceptance profile: 64x64, 500 sequences of L = 10, one pass.
  static TrainConfig toy();
  void validate() const;
};

// Keys override the toy profile. Unknown keys and invalid values throw ConfigError.
TrainConfig train_config_from(const KeyValues& kv);
KeyValues to_key_values(const TrainConfig& cfg);
// Canonical text form ("key = value" lines, sorted), parseable by KeyValues.
std::string to_text(const TrainConfig& cfg);
// FNV-1a of the canonical text.
uint64_t config_hash(const TrainConfig& cfg);

}  // namespace evflow
