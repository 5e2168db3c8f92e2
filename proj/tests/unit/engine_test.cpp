#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mwafm/engine.hpp"
#include "mwafm/error.hpp"
#include "mwafm/head.hpp"
#include "mwafm/synth.hpp"
#include "temp_dir.hpp"

using namespace mwafm;

namespace {

Config small_config(std::uint64_t seed = 0) {
  Config c;
  c.set("model.d", "8");
  c.set("model.heads", "2");
  c.set("model.audio_len", "8");
  c.set("model.question_len", "6");
  c.set("mwam.windows", "2,4");
  c.set("train.batch_size", "8");
  c.set("train.epochs", "2");
  c.set("train.lr", "1e-2");
  c.set("train.seed", std::to_string(seed));
  return c;
}

struct Data {
  std::vector<Sample> train, val;
  AnswerVocab vocab;
};

Data make_data(std::uint64_t seed, std::size_t train = 64, std::size_t val = 16) {
  SynthConfig sc;
  sc.train = train;
  sc.val = val;
  sc.test = 0;
  const auto samples = synth_generate(sc, seed);
  Data d{synth_split(samples, "train"), synth_split(samples, "val"), {}};
  d.vocab = build_answer_vocab(synth_manifest(samples), 1000);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Checkpoint, RoundTripWithOptimizer) {
  TempDir dir;
  const Data data = make_data(1);
  const TrainResult r = train(small_config(), data.train, data.val, data.vocab);
  save_checkpoint(r.last, dir / "c.ckpt");
  EXPECT_EQ(load_checkpoint(dir / "c.ckpt"), r.last);
  save_checkpoint(r.last, dir / "p.ckpt", false);
  const Checkpoint params_only = load_checkpoint(dir / "p.ckpt");
  EXPECT_EQ(params_only.params, r.last.params);
  EXPECT_TRUE(params_only.optimizer.m.empty());
}

TEST(Checkpoint, CorruptionDetected) {
  TempDir dir;
  Checkpoint c;
  c.params["head.b"] = Tensor::vector({1, 2});
  save_checkpoint(c, dir / "c.ckpt");
  std::string bytes = slurp(dir / "c.ckpt");
  std::ofstream(dir / "t.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), FormatError);
  bytes[1] = 'X';
  std::ofstream(dir / "m.ckpt", std::ios::binary) << bytes;
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), FormatError);
}

TEST(Evaluate, DeterministicAndBitwiseAfterReload) {
  TempDir dir;
  const Data data = make_data(2);
  const Config config = small_config();
  const TrainResult r = train(config, data.train, data.val, data.vocab);
  const ModelConfig mc = model_config(config);
  const EvalReport a = evaluate(mc, r.best.params, data.val, data.vocab);
  EXPECT_EQ(a, evaluate(mc, r.best.params, data.val, data.vocab));
  save_checkpoint(r.best, dir / "b.ckpt", false);
  EXPECT_EQ(evaluate(mc, load_checkpoint(dir / "b.ckpt").params, data.val, data.vocab), a);
  EXPECT_LE(a.top1, a.top5);
  EXPECT_LE(a.top5, a.top10);
  EXPECT_EQ(a.num_samples, data.val.size());
}

TEST(Evaluate, ForcedArgmax) {
  const Data data = make_data(3, 8, 1);
  const ModelConfig mc = model_config(small_config());
  ParamStore params = init_params(mc, data.vocab.size(), 0);
  for (double& v : params.at("head.w").data()) v = 0.0;
  const std::size_t label = data.vocab.id(data.val[0].bundle.answer);
  params.at("head.b")[label] = 5.0;
  const EvalReport r = evaluate(mc, params, std::span<const Sample>(data.val.data(), 1), data.vocab);
  EXPECT_EQ(r.top1, 1.0);
}

TEST(Evaluate, TopKMatchesDumpedLogits) {
  const Data data = make_data(4);
  const Config config = small_config();
  const TrainResult r = train(config, data.train, data.val, data.vocab);
  std::vector<std::vector<double>> logits;
  const EvalReport report = evaluate(model_config(config), r.best.params, data.val, data.vocab, &logits);
  ASSERT_EQ(logits.size(), data.val.size());
  std::vector<Prediction> preds;
  std::vector<std::size_t> labels;
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    preds.push_back(Prediction::from_logits(logits[i]));
    labels.push_back(data.vocab.id(data.val[i].bundle.answer));
    loss += cross_entropy(logits[i], labels.back());
  }
  const std::size_t c = data.vocab.size();
  EXPECT_EQ(report.top1, topk_accuracy(preds, labels, 1));
  EXPECT_EQ(report.top5, topk_accuracy(preds, labels, std::min<std::size_t>(5, c)));
  EXPECT_EQ(report.top10, topk_accuracy(preds, labels, std::min<std::size_t>(10, c)));
  EXPECT_DOUBLE_EQ(report.loss, loss / static_cast<double>(logits.size()));
}

TEST(Evaluate, VocabMismatchNamesBothSizes) {
  const Data data = make_data(5, 8, 2);
  const ModelConfig mc = model_config(small_config());
  const ParamStore params = init_params(mc, 7, 0);
  try {
    evaluate(mc, params, data.val, data.vocab);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(std::to_string(data.vocab.size())), std::string::npos);
    EXPECT_NE(what.find("7"), std::string::npos);
  }
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  const Data data = make_data(6, 16, 4);
  Config config = small_config(9);
  config.set("train.epochs", "0");
  const TrainResult r = train(config, data.train, data.val, data.vocab);
  EXPECT_EQ(r.last.params, init_params(model_config(config), data.vocab.size(), 9));
  EXPECT_EQ(r.best.params, r.last.params);
  EXPECT_TRUE(r.log.empty());
}

TEST(Train, OneEpochLowersLoss) {
  std::vector<double> drops;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Data data = make_data(10 + seed, 64, 0);
    Config config = small_config(seed);
    config.set("train.epochs", "1");
    const ModelConfig mc = model_config(config);
    const EvalReport before =
        evaluate(mc, init_params(mc, data.vocab.size(), seed), data.train, data.vocab);
    const TrainResult r = train(config, data.train, {}, data.vocab);
    drops.push_back(before.loss - evaluate(mc, r.last.params, data.train, data.vocab).loss);
  }
  std::sort(drops.begin(), drops.end());
  EXPECT_GT(drops[1], 0.0);
}

TEST(Train, SameSeedSameLog) {
  TempDir a, b;
  const Data data = make_data(7);
  train(small_config(3), data.train, data.val, data.vocab, {.out_dir = a.path()});
  train(small_config(3), data.train, data.val, data.vocab, {.out_dir = b.path()});
  const std::string log = slurp(a / "metrics.jsonl");
  EXPECT_EQ(log, slurp(b / "metrics.jsonl"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  EXPECT_EQ(log.rfind("{\"epoch\":1,\"split\":\"train\",\"loss\":", 0), 0u);
  EXPECT_EQ(slurp(a / "best.ckpt"), slurp(b / "best.ckpt"));
  EXPECT_EQ(AnswerVocab::load(a / "vocab.txt"), data.vocab);
}

TEST(Train, ResumeReplaysMetrics) {
  TempDir full, part;
  const Data data = make_data(8);
  Config config = small_config(4);
  config.set("train.epochs", "3");
  const TrainResult straight = train(config, data.train, data.val, data.vocab, {.out_dir = full.path()});

  Config first = config;
  first.set("train.epochs", "1");
  train(first, data.train, data.val, data.vocab, {.out_dir = part.path()});
  const Checkpoint saved = load_checkpoint(part / "last.ckpt");
  const TrainResult resumed = train(config, data.train, data.val, data.vocab, {.out_dir = part.path(), .resume = &saved});

  ASSERT_EQ(resumed.log.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(resumed.log[i].to_json(), straight.log[i + 2].to_json());
  EXPECT_EQ(resumed.last.params, straight.last.params);
  EXPECT_EQ(slurp(part / "metrics.jsonl"), slurp(full / "metrics.jsonl"));
}

TEST(Train, BestSelectedByValidation) {
  const Data data = make_data(9);
  Config config = small_config(5);
  config.set("train.epochs", "4");
  const TrainResult r = train(config, data.train, data.val, data.vocab);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& rec : r.log) {
    if (rec.split == "val" && rec.top1 > best) {
      best = rec.top1;
      best_epoch = rec.epoch;
    }
  }
  EXPECT_EQ(r.best.epoch, best_epoch);
  EXPECT_EQ(r.best.best_val_top1, best);
  EXPECT_EQ(evaluate(model_config(config), r.best.params, data.val, data.vocab).top1, best);
}

TEST(Train, StopsAtTarget) {
  const Data data = make_data(10);
  Config config = small_config(6);
  config.set("train.epochs", "5");
  config.set("train.stop_at_top1", "0.01");
  const TrainResult r = train(config, data.train, data.val, data.vocab);
  EXPECT_EQ(r.last.epoch, 1u);
}

TEST(Train, MetricsInvariants) {
  const Data data = make_data(11);
  Config config = small_config(7);
  config.set("train.epochs", "3");
  for (const auto& rec : train(config, data.train, data.val, data.vocab).log) {
    EXPECT_LE(rec.top1, rec.top5);
    EXPECT_LE(rec.top5, rec.top10);
    EXPECT_GE(rec.loss, 0.0);
  }
}
