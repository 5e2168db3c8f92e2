#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mwafm/aham.hpp"
#include "mwafm/mwam.hpp"
#include "mwafm/synth.hpp"

namespace mwafm {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Flat `key = value` store with dotted keys. Only registered keys are
/// accepted; values are checked when a typed view is built.
class Config {
 public:
  Config();

  static const std::vector<ConfigKey>& keys();

  /// Parses `key = value` lines; `#` starts a comment.
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` override.
  void apply(std::string_view assignment);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  /// Every key in registry order, one `key = value` per line.
  std::string echo() const;

  friend bool operator==(const Config&, const Config&) = default;

 private:
  std::map<std::string, std::string> values_;
};

struct ModelConfig {
  std::size_t d = 512;
  std::size_t heads = 4;
  std::size_t audio_dim = 128;
  std::size_t question_dim = 300;
  std::size_t audio_len = 24;
  std::size_t question_len = 20;
  double dropout = 0.1;
  double ln_eps = kLayerNormEps;
  AhamOptions aham;
  bool mwam_enabled = true;
  bool share_scale_params = false;
  MwamOptions mwam;
  /// Replace the multi-scale module by this many extra hybrid attention passes.
  std::size_t star_layers = 0;

  bool uses_mwam() const noexcept { return mwam_enabled && star_layers == 0; }
  void validate() const;
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t max_vocab = 1000;
  /// Stop once validation top-1 reaches this value; 0 disables.
  double stop_at_top1 = 0.0;

  void validate() const;
};

struct GradCheckConfig {
  double eps = 1e-6;
  std::size_t coords = 5;
  double tolerance = 1e-6;
  double floor = 1e-3;
  /// Path prefixes to check; empty checks every parameter.
  std::vector<std::string> paths;
  std::size_t batch = 2;
  std::size_t classes = 5;
};

ModelConfig model_config(const Config& config);
TrainConfig train_config(const Config& config);
SynthConfig synth_config(const Config& config);
GradCheckConfig gradcheck_config(const Config& config);

/// Settings for the tiny full-model gradient check.
Config tiny_config();

}  // namespace mwafm
