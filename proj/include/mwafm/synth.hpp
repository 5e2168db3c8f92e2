#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mwafm/bundle.hpp"
#include "mwafm/dataset.hpp"

namespace mwafm {

/// Parameters of the seeded sound-event question generator.
struct SynthConfig {
  std::size_t train = 2000;
  std::size_t val = 0;
  std::size_t test = 500;
  std::size_t event_types = 8;
  std::size_t min_seconds = 15;
  std::size_t max_seconds = 30;
  std::size_t short_min = 1;
  std::size_t short_max = 3;
  std::size_t long_min = 8;
  std::size_t long_max = 15;
  std::size_t max_count = 4;
  double noise = 0.2;
  /// Any of: presence, longest, count.
  std::vector<std::string> templates{"presence"};

  void validate() const;
};

struct SynthEvent {
  std::size_t type = 0;
  std::size_t start = 0;
  std::size_t length = 0;

  friend bool operator==(const SynthEvent&, const SynthEvent&) = default;
};

struct SynthSample {
  FeatureBundle bundle;
  std::string split;
  std::string question_type;
  std::vector<SynthEvent> events;
};

std::string event_name(std::size_t type);

/// Deterministic for a fixed (config, seed). Answers follow from the
/// placed events by construction.
std::vector<SynthSample> synth_generate(const SynthConfig& config, std::uint64_t seed);

/// Answer a template question from event metadata alone.
std::string answer_from_events(const std::string& question_type, const std::vector<std::string>& tokens,
                               const std::vector<SynthEvent>& events);

/// Writes bundles/<id>.mwaf, one manifest per split (train.tsv, val.tsv,
/// test.tsv) and events.tsv with the placed spans.
void write_synth(const std::vector<SynthSample>& samples, const std::filesystem::path& out_dir);

/// Splits generated samples into engine inputs.
std::vector<Sample> synth_split(const std::vector<SynthSample>& samples, const std::string& split);
Manifest synth_manifest(const std::vector<SynthSample>& samples);

}  // namespace mwafm
