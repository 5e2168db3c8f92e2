#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mwafm {

/// Per-position validity flags (true = real data, false = padding).
using ValidMask = std::vector<bool>;

/// Which (query, key) pairs may attend to each other.
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t num_queries, std::size_t num_keys, bool fill = true)
      : rows_(num_queries), cols_(num_keys), allowed_(num_queries * num_keys, fill ? 1 : 0) {}

  static AttentionMask full(std::size_t num_queries, std::size_t num_keys) {
    return AttentionMask(num_queries, num_keys, true);
  }
  /// Key-padding and query-padding applied together.
  static AttentionMask padding(const ValidMask& query_valid, const ValidMask& key_valid);

  std::size_t num_queries() const noexcept { return rows_; }
  std::size_t num_keys() const noexcept { return cols_; }

  bool allowed(std::size_t q, std::size_t k) const { return allowed_[q * cols_ + k] != 0; }
  void set(std::size_t q, std::size_t k, bool v) { allowed_[q * cols_ + k] = v ? 1 : 0; }

  std::size_t count() const noexcept;

  /// Conjunction; shapes must agree.
  AttentionMask operator&&(const AttentionMask& other) const;

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> allowed_;
};

}  // namespace mwafm
