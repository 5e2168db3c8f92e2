#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mwafm/config.hpp"
#include "mwafm/dataset.hpp"
#include "mwafm/optim.hpp"
#include "mwafm/params.hpp"

namespace mwafm {

struct EvalReport {
  std::size_t num_samples = 0;
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double top10 = 0.0;
  /// question type -> top-1 accuracy
  std::map<std::string, double> per_type;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Trained state plus what is needed to resume or evaluate it.
struct Checkpoint {
  ParamStore params;
  AdamState optimizer;
  std::string config_echo;
  std::uint64_t epoch = 0;
  double best_val_top1 = -1.0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// `include_optimizer == false` writes parameters only (enough for evaluation).
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path, bool include_optimizer = true);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Number of answer classes of the head stored in `params`.
std::size_t head_classes(const ParamStore& params);

/// Eval-mode metrics. Top-k uses min(k, C). `logits_out`, when given,
/// receives one row of logits per sample.
EvalReport evaluate(const ModelConfig& config, const ParamStore& params, std::span<const Sample> samples,
                    const AnswerVocab& vocab, std::vector<std::vector<double>>* logits_out = nullptr);

/// One line of the metrics log.
struct MetricsRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double top10 = 0.0;

  std::string to_json() const;
};

struct TrainOptions {
  /// When set: vocab.txt, metrics.jsonl, last.ckpt and best.ckpt are written here.
  std::optional<std::filesystem::path> out_dir;
  /// Continue from this state instead of a fresh initialization.
  const Checkpoint* resume = nullptr;
  std::function<void(const MetricsRecord&)> on_record;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<MetricsRecord> log;
};

/// Adam training with per-epoch seeded shuffling and dropout streams.
/// The best checkpoint is selected by validation top-1 (last epoch when no
/// validation data is given).
TrainResult train(const Config& config, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const AnswerVocab& vocab, const TrainOptions& options = {});

}  // namespace mwafm
