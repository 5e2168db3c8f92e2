#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mwafm/bundle.hpp"
#include "mwafm/mask.hpp"

namespace mwafm {

struct ManifestRecord {
  std::string sample_id;
  std::string bundle_path;  ///< relative paths resolve against the manifest directory
  std::string answer;
  std::string split;        ///< train | val | test
  std::string question_type = "all";

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Tab-separated manifest: sample_id, bundle path, answer, split and an
/// optional question-type column.
struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  static Manifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Records of one split, in file order.
  Manifest filter(const std::string& split) const;
  std::filesystem::path resolve(const ManifestRecord& record) const;
};

/// Answer strings to class ids; the unknown slot is always last.
class AnswerVocab {
 public:
  static constexpr const char* kUnknown = "<unk>";

  AnswerVocab() = default;
  explicit AnswerVocab(std::vector<std::string> answers);

  std::size_t size() const noexcept { return answers_.size() + 1; }
  std::size_t unk_id() const noexcept { return answers_.size(); }
  std::size_t id(const std::string& answer) const;
  const std::string& answer(std::size_t id) const;
  const std::vector<std::string>& answers() const noexcept { return answers_; }

  static AnswerVocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const AnswerVocab& a, const AnswerVocab& b) { return a.answers_ == b.answers_; }

 private:
  std::vector<std::string> answers_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string unknown_ = kUnknown;
};

/// Answers of the train split ranked by frequency then lexicographically,
/// truncated to `max_size`.
AnswerVocab build_answer_vocab(const Manifest& manifest, std::size_t max_size);

/// A bundle plus the bookkeeping the engine needs.
struct Sample {
  FeatureBundle bundle;
  std::string question_type = "all";
};

/// Loads every bundle of a manifest; the manifest answer must match the bundle.
std::vector<Sample> load_samples(const Manifest& manifest);

/// Fixed-shape minibatch: audio [B x audio_len x 128], question
/// [B x question_len x 300].
struct Batch {
  Tensor audio;
  std::vector<ValidMask> audio_valid;
  Tensor question;
  std::vector<ValidMask> question_valid;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

inline constexpr std::size_t kAudioLength = 24;
inline constexpr std::size_t kQuestionLength = 20;

/// Interpolates audio to `audio_len` rows and pads/truncates questions to
/// `question_len` tokens; unseen answers map to the unknown id.
Batch make_batch(std::span<const FeatureBundle* const> bundles, const AnswerVocab& vocab,
                 std::size_t audio_len = kAudioLength, std::size_t question_len = kQuestionLength);
Batch make_batch(std::span<const FeatureBundle> bundles, const AnswerVocab& vocab,
                 std::size_t audio_len = kAudioLength, std::size_t question_len = kQuestionLength);

}  // namespace mwafm
