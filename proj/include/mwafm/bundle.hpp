#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mwafm/tensor.hpp"

namespace mwafm {

inline constexpr std::size_t kAudioChannels = 128;
inline constexpr std::size_t kQuestionChannels = 300;
inline constexpr std::uint32_t kFormatVersion = 1;

/// One sample's precomputed features and answer metadata.
struct FeatureBundle {
  Tensor audio;                 ///< [T x 128], one row per second
  Tensor question_embeddings;   ///< [N x 300], one row per token
  std::vector<std::string> question_tokens;
  std::string answer;
  std::string sample_id;

  /// Throws FormatError(malformed / non_finite) when an invariant fails.
  void validate() const;

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

struct TensorRecord {
  std::string name;
  Tensor value;
};

/// Little-endian writer for the tensor-record container.
class BinaryWriter {
 public:
  void bytes(std::string_view raw) { buffer_.append(raw); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void string(std::string_view s);
  void record(const TensorRecord& r);

  const std::string& buffer() const noexcept { return buffer_; }
  /// Writes through a temporary file and renames it into place.
  void save(const std::filesystem::path& path) const;

 private:
  std::string buffer_;
};

/// Bounds-checked reader over a whole file; short reads raise
/// FormatError(truncated).
class BinaryReader {
 public:
  explicit BinaryReader(std::string data) : data_(std::move(data)) {}
  static BinaryReader open(const std::filesystem::path& path);

  /// Checks the 4-byte magic and the version word.
  void expect_header(std::string_view magic);
  std::string bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string string();
  TensorRecord record();
  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  std::string data_;
  std::size_t pos_ = 0;
};

std::string encode_feature_bundle(const FeatureBundle& bundle);
FeatureBundle decode_feature_bundle(std::string data);

void write_feature_bundle(const FeatureBundle& bundle, const std::filesystem::path& path);
FeatureBundle load_feature_bundle(const std::filesystem::path& path);

}  // namespace mwafm
