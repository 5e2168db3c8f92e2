#include "mwafm/engine.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mwafm/bundle.hpp"
#include "mwafm/error.hpp"
#include "mwafm/head.hpp"
#include "mwafm/model.hpp"

namespace mwafm {

namespace {

constexpr std::string_view kCheckpointMagic = "MWCK";
constexpr std::size_t kEvalChunk = 64;
const std::string kMomentPrefix = "adam.m/";
const std::string kVelocityPrefix = "adam.v/";

Rng epoch_rng(std::uint64_t seed, std::uint64_t epoch, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), stream};
  return Rng(seq);
}

struct Tally {
  std::vector<Prediction> predictions;
  std::vector<std::size_t> labels;
  double loss_sum = 0.0;

  void add(const Tensor& logits, std::span<const std::size_t> batch_labels) {
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      predictions.push_back(Prediction::from_logits(logits.row(r)));
      labels.push_back(batch_labels[r]);
      loss_sum += cross_entropy(logits.row(r), batch_labels[r]);
    }
  }

  double topk(std::size_t k, std::size_t classes) const {
    return topk_accuracy(predictions, labels, std::min(k, classes));
  }
};

MetricsRecord make_record(std::size_t epoch, std::string split, const Tally& tally, std::size_t classes) {
  return {epoch,
          std::move(split),
          tally.loss_sum / static_cast<double>(tally.labels.size()),
          tally.topk(1, classes),
          tally.topk(5, classes),
          tally.topk(10, classes)};
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path, bool include_optimizer) {
  BinaryWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kFormatVersion);
  const auto moments = include_optimizer ? checkpoint.optimizer.m.size() + checkpoint.optimizer.v.size() : 0;
  w.u32(static_cast<std::uint32_t>(checkpoint.params.size() + moments));
  for (const auto& [path_key, value] : checkpoint.params) w.record({path_key, value});
  if (include_optimizer) {
    for (const auto& [path_key, value] : checkpoint.optimizer.m) w.record({kMomentPrefix + path_key, value});
    for (const auto& [path_key, value] : checkpoint.optimizer.v) w.record({kVelocityPrefix + path_key, value});
  }
  w.string(checkpoint.config_echo);
  w.u64(checkpoint.optimizer.step);
  w.u64(checkpoint.epoch);
  w.f64(checkpoint.best_val_top1);
  w.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_header(kCheckpointMagic);
  Checkpoint c;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord rec = r.record();
    std::map<std::string, Tensor>* target = &c.params;
    std::string key = rec.name;
    if (key.starts_with(kMomentPrefix)) {
      target = &c.optimizer.m;
      key.erase(0, kMomentPrefix.size());
    } else if (key.starts_with(kVelocityPrefix)) {
      target = &c.optimizer.v;
      key.erase(0, kVelocityPrefix.size());
    }
    if (!target->emplace(key, std::move(rec.value)).second) {
      throw FormatError(FormatErrorKind::malformed, "duplicate checkpoint record '" + rec.name + "'");
    }
  }
  c.config_echo = r.string();
  c.optimizer.step = r.u64();
  c.epoch = r.u64();
  c.best_val_top1 = r.f64();
  if (!r.at_end()) throw FormatError(FormatErrorKind::malformed, "trailing bytes after checkpoint");
  return c;
}

std::size_t head_classes(const ParamStore& params) {
  auto it = params.find("head.b");
  if (it == params.end()) throw ValidationError("parameters have no answer head");
  return it->second.numel();
}

EvalReport evaluate(const ModelConfig& config, const ParamStore& params, std::span<const Sample> samples,
                    const AnswerVocab& vocab, std::vector<std::vector<double>>* logits_out) {
  const std::size_t classes = head_classes(params);
  if (vocab.size() != classes) {
    throw ValidationError("vocabulary has " + std::to_string(vocab.size()) + " classes but the checkpoint head has " +
                          std::to_string(classes));
  }
  if (samples.empty()) throw ValidationError("evaluate: no samples");
  Tally tally;
  std::vector<std::string> types;
  Rng unused(0);
  for (std::size_t begin = 0; begin < samples.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(samples.size(), begin + kEvalChunk);
    std::vector<const FeatureBundle*> bundles;
    for (std::size_t i = begin; i < end; ++i) {
      bundles.push_back(&samples[i].bundle);
      types.push_back(samples[i].question_type);
    }
    const Batch batch = make_batch(bundles, vocab, config.audio_len, config.question_len);
    Tape tape;
    ParamBinder binder(params, tape, false);
    const Var logits = model_forward(config, binder, batch, false, unused);
    tally.add(logits.value(), batch.labels);
    if (logits_out) {
      for (std::size_t r = 0; r < logits.value().rows(); ++r) {
        auto row = logits.value().row(r);
        logits_out->emplace_back(row.begin(), row.end());
      }
    }
  }
  EvalReport report;
  report.num_samples = samples.size();
  report.loss = tally.loss_sum / static_cast<double>(samples.size());
  report.top1 = tally.topk(1, classes);
  report.top5 = tally.topk(5, classes);
  report.top10 = tally.topk(10, classes);
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_type;
  for (std::size_t i = 0; i < types.size(); ++i) {
    auto& [hits, total] = per_type[types[i]];
    ++total;
    if (tally.predictions[i].top1 == tally.labels[i]) ++hits;
  }
  for (const auto& [type, counts] : per_type) {
    report.per_type[type] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return report;
}

std::string MetricsRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["split"] = split;
  j["loss"] = loss;
  j["top1"] = top1;
  j["top5"] = top5;
  j["top10"] = top10;
  return j.dump();
}

TrainResult train(const Config& config, std::span<const Sample> train_set, std::span<const Sample> val_set,
                  const AnswerVocab& vocab, const TrainOptions& options) {
  const ModelConfig model = model_config(config);
  const TrainConfig tc = train_config(config);
  if (train_set.empty()) throw ValidationError("train: empty training set");
  const std::size_t classes = vocab.size();
  const AdamConfig adam{tc.lr, tc.beta1, tc.beta2, tc.adam_eps};

  TrainResult result;
  Checkpoint state;
  if (options.resume) {
    state = *options.resume;
    if (head_classes(state.params) != classes) {
      throw ValidationError("resume checkpoint head has " + std::to_string(head_classes(state.params)) +
                            " classes but the vocabulary has " + std::to_string(classes));
    }
  } else {
    state.params = init_params(model, classes, tc.seed);
  }
  state.config_echo = config.echo();
  result.best = state;

  if (options.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.out_dir, ec);
    if (ec) throw IoError("cannot create " + options.out_dir->string() + ": " + ec.message());
    vocab.save(*options.out_dir / "vocab.txt");
    if (!options.resume) {
      std::ofstream(*options.out_dir / "metrics.jsonl", std::ios::trunc);
      save_checkpoint(state, *options.out_dir / "best.ckpt", false);
    }
    save_checkpoint(state, *options.out_dir / "last.ckpt");
  }
  auto emit = [&](MetricsRecord rec) {
    if (options.out_dir) append_line(*options.out_dir / "metrics.jsonl", rec.to_json());
    if (options.on_record) options.on_record(rec);
    result.log.push_back(std::move(rec));
  };

  while (state.epoch < tc.epochs) {
    const std::uint64_t epoch = state.epoch + 1;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = epoch_rng(tc.seed, epoch, 1);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng dropout_rng = epoch_rng(tc.seed, epoch, 2);

    Tally tally;
    for (std::size_t begin = 0; begin < order.size(); begin += tc.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tc.batch_size);
      std::vector<const FeatureBundle*> bundles;
      for (std::size_t i = begin; i < end; ++i) bundles.push_back(&train_set[order[i]].bundle);
      const Batch batch = make_batch(bundles, vocab, model.audio_len, model.question_len);
      Tape tape;
      ParamBinder binder(state.params, tape, true);
      const Var logits = model_forward(model, binder, batch, true, dropout_rng);
      const Var loss = cross_entropy_mean(logits, batch.labels);
      tape.backward(loss);
      tally.add(logits.value(), batch.labels);
      adam_step(state.params, binder.gradients(), state.optimizer, adam);
    }
    state.epoch = epoch;
    emit(make_record(epoch, "train", tally, classes));

    bool improved = false;
    double val_top1 = 0.0;
    if (!val_set.empty()) {
      const EvalReport report = evaluate(model, state.params, val_set, vocab);
      val_top1 = report.top1;
      emit({epoch, "val", report.loss, report.top1, report.top5, report.top10});
      improved = report.top1 > state.best_val_top1;
      if (improved) state.best_val_top1 = report.top1;
    } else {
      improved = true;
    }
    if (improved) result.best = state;
    if (options.out_dir) {
      if (improved) save_checkpoint(state, *options.out_dir / "best.ckpt", false);
      save_checkpoint(state, *options.out_dir / "last.ckpt");
    }
    if (tc.stop_at_top1 > 0.0 && !val_set.empty() && val_top1 >= tc.stop_at_top1) break;
  }
  result.last = std::move(state);
  return result;
}

}  // namespace mwafm
