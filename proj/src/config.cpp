#include "evflow/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "evflow/errors.hpp"

namespace evflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "train.sequence_length", "train.lr", "train.epochs", "train.batch_size", "train.profile",
      "train.seed", "train.beta1", "train.beta2", "train.adam_eps", "train.log_every",
      "loss.alpha", "loss.lambda1", "loss.lambda2", "loss.gamma", "loss.eps", "loss.multiscale",
      "loss.normalize_at",
      "model.base_channels", "model.st_convgru", "model.share_st_branches", "model.prior_flow",
      "model.share_refine_gru", "model.max_flow_fraction", "model.gate_kernel",
      "data.height", "data.width", "data.dots", "data.bar_length", "data.interval", "data.event_rate",
      "data.timing", "data.max_flow", "data.sequences", "data.eval_sequences"};
  return keys;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& is, const std::string& origin) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<int>(key, it->second);
}

uint64_t KeyValues::get_u64(const std::string& key, uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<uint64_t>(key, it->second);
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

TrainConfig TrainConfig::toy() {
  TrainConfig c;
  c.epochs = 1;
  c.data.sequences = 500;
  return c;
}

void TrainConfig::validate() const {
  if (sequence_length < 1) throw ConfigError("train.sequence_length must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (profile != "toy" && profile != "full") throw ConfigError("train.profile must be 'toy' or 'full'");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  loss.validate();
  model.encoder.validate();
  if (data.scene.sensor.height % 16 != 0 || data.scene.sensor.width % 16 != 0 ||
      data.scene.sensor.height <= 0 || data.scene.sensor.width <= 0) {
    throw ConfigError("data.height and data.width must be positive multiples of 16");
  }
  if (data.scene.dots < 1) throw ConfigError("data.dots must be >= 1");
  if (data.scene.bar_length < 1) throw ConfigError("data.bar_length must be >= 1");
  if (!(data.scene.interval > 0.0)) throw ConfigError("data.interval must be positive");
  if (!(data.scene.event_rate > 0.0)) throw ConfigError("data.event_rate must be positive");
  if (!(data.max_flow >= 0.0)) throw ConfigError("data.max_flow must be >= 0");
  if (data.sequences < 1) throw ConfigError("data.sequences must be >= 1");
  if (data.eval_sequences < 0) throw ConfigError("data.eval_sequences must be >= 0");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
}

TrainConfig train_config_from(const KeyValues& kv) {
  for (const auto& [key, value] : kv.entries()) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  // Files override the toy profile, as running without a file uses it.
  TrainConfig c = TrainConfig::toy();
  c.sequence_length = kv.get_int("train.sequence_length", c.sequence_length);
  c.learning_rate = kv.get_double("train.lr", c.learning_rate);
  c.epochs = kv.get_int("train.epochs", c.epochs);
  c.batch_size = kv.get_int("train.batch_size", c.batch_size);
  c.profile = kv.get_string("train.profile", c.profile);
  c.seed = kv.get_u64("train.seed", c.seed);
  c.adam.beta1 = kv.get_double("train.beta1", c.adam.beta1);
  c.adam.beta2 = kv.get_double("train.beta2", c.adam.beta2);
  c.adam.eps = kv.get_double("train.adam_eps", c.adam.eps);
  c.adam.lr = c.learning_rate;
  c.log_every = kv.get_int("train.log_every", c.log_every);

  c.loss.alpha = kv.get_double("loss.alpha", c.loss.alpha);
  c.loss.lambda1 = kv.get_double("loss.lambda1", c.loss.lambda1);
  c.loss.lambda2 = kv.get_double("loss.lambda2", c.loss.lambda2);
  c.loss.charbonnier_gamma = kv.get_double("loss.gamma", c.loss.charbonnier_gamma);
  c.loss.charbonnier_eps = kv.get_double("loss.eps", c.loss.charbonnier_eps);
  c.loss.multiscale = kv.get_bool("loss.multiscale", c.loss.multiscale);
  c.loss.normalize_at = kv.get_bool("loss.normalize_at", c.loss.normalize_at);

  const int default_base = c.profile == "full" ? 32 : 8;
  c.model = ModelConfig::with_base_channels(kv.get_int("model.base_channels", default_base));
  c.model.seed = c.seed;
  c.model.encoder.st_convgru = kv.get_bool("model.st_convgru", true);
  c.model.encoder.share_st_branches = kv.get_bool("model.share_st_branches", false);
  c.model.encoder.gate_kernel = kv.get_int("model.gate_kernel", c.model.encoder.gate_kernel);
  c.model.decoder.prior_flow = kv.get_bool("model.prior_flow", true);
  c.model.decoder.share_refine_gru = kv.get_bool("model.share_refine_gru", false);
  c.model.decoder.max_flow_fraction =
      kv.get_double("model.max_flow_fraction", c.model.decoder.max_flow_fraction);

  c.data.scene.sensor.height = kv.get_int("data.height", c.data.scene.sensor.height);
  c.data.scene.sensor.width = kv.get_int("data.width", c.data.scene.sensor.width);
  c.data.scene.dots = kv.get_int("data.dots", c.data.scene.dots);
  c.data.scene.bar_length = kv.get_int("data.bar_length", c.data.scene.bar_length);
  c.data.scene.interval = kv.get_double("data.interval", c.data.scene.interval);
  c.data.scene.event_rate = kv.get_double("data.event_rate", c.data.scene.event_rate);
  const std::string timing = kv.get_string("data.timing", "uniform");
  if (timing == "uniform") {
    c.data.scene.timing = EmissionTiming::uniform;
  } else if (timing == "poisson") {
    c.data.scene.timing = EmissionTiming::poisson;
  } else {
    throw ConfigError("data.timing must be 'uniform' or 'poisson'");
  }
  c.data.max_flow = kv.get_double("data.max_flow", c.data.max_flow);
  c.data.sequences = kv.get_int("data.sequences", c.data.sequences);
  c.data.eval_sequences = kv.get_int("data.eval_sequences", c.data.eval_sequences);
  c.data.scene.volumes = c.sequence_length;
  c.validate();
  return c;
}

KeyValues to_key_values(const TrainConfig& c) {
  KeyValues kv;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  kv.set("train.sequence_length", std::to_string(c.sequence_length));
  kv.set("train.lr", format_double(c.learning_rate));
  kv.set("train.epochs", std::to_string(c.epochs));
  kv.set("train.batch_size", std::to_string(c.batch_size));
  kv.set("train.profile", c.profile);
  kv.set("train.seed", std::to_string(c.seed));
  kv.set("train.beta1", format_double(c.adam.beta1));
  kv.set("train.beta2", format_double(c.adam.beta2));
  kv.set("train.adam_eps", format_double(c.adam.eps));
  kv.set("train.log_every", std::to_string(c.log_every));
  kv.set("loss.alpha", format_double(c.loss.alpha));
  kv.set("loss.lambda1", format_double(c.loss.lambda1));
  kv.set("loss.lambda2", format_double(c.loss.lambda2));
  kv.set("loss.gamma", format_double(c.loss.charbonnier_gamma));
  kv.set("loss.eps", format_double(c.loss.charbonnier_eps));
  kv.set("loss.multiscale", b(c.loss.multiscale));
  kv.set("loss.normalize_at", b(c.loss.normalize_at));
  kv.set("model.base_channels", std::to_string(c.model.encoder.channels[0]));
  kv.set("model.st_convgru", b(c.model.encoder.st_convgru));
  kv.set("model.share_st_branches", b(c.model.encoder.share_st_branches));
  kv.set("model.gate_kernel", std::to_string(c.model.encoder.gate_kernel));
  kv.set("model.prior_flow", b(c.model.decoder.prior_flow));
  kv.set("model.share_refine_gru", b(c.model.decoder.share_refine_gru));
  kv.set("model.max_flow_fraction", format_double(c.model.decoder.max_flow_fraction));
  kv.set("data.height", std::to_string(c.data.scene.sensor.height));
  kv.set("data.width", std::to_string(c.data.scene.sensor.width));
  kv.set("data.dots", std::to_string(c.data.scene.dots));
  kv.set("data.bar_length", std::to_string(c.data.scene.bar_length));
  kv.set("data.interval", format_double(c.data.scene.interval));
  kv.set("data.event_rate", format_double(c.data.scene.event_rate));
  kv.set("data.timing", c.data.scene.timing == EmissionTiming::poisson ? "poisson" : "uniform");
  kv.set("data.max_flow", format_double(c.data.max_flow));
  kv.set("data.sequences", std::to_string(c.data.sequences));
  kv.set("data.eval_sequences", std::to_string(c.data.eval_sequences));
  return kv;
}

std::string to_text(const TrainConfig& cfg) {
  std::ostringstream os;
  const KeyValues kv = to_key_values(cfg);
  for (const auto& [key, value] : kv.entries()) os << key << " = " << value << '\n';
  return os.str();
}

uint64_t config_hash(const TrainConfig& cfg) {
  uint64_t h = 1469598103934665603ull;
  for (const unsigned char ch : to_text(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace evflow
