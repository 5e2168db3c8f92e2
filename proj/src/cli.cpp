#include "mwafm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include "mwafm/config.hpp"
#include "mwafm/engine.hpp"
#include "mwafm/error.hpp"
#include "mwafm/gradcheck.hpp"
#include "mwafm/synth.hpp"

namespace mwafm {
namespace {

struct Args {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string manifest;
  std::string val_manifest;
  std::string vocab;
  std::string split = "test";
  std::string logits_path;
  std::string bundle;
};

Config build_config(const Args& a, Config base) {
  if (!a.config_path.empty()) base = Config::load(a.config_path);
  for (const auto& o : a.overrides) base.apply(o);
  if (a.seed) base.set("train.seed", std::to_string(*a.seed));
  return base;
}

std::string keys_footer() {
  std::ostringstream s;
  s << "Config keys (--config file or --set key=value):\n";
  for (const auto& k : Config::keys()) {
    s << "  " << std::left << std::setw(26) << k.name << " " << std::setw(10) << k.default_value << " " << k.help
      << "\n";
  }
  return s.str();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "samples  " << r.num_samples << "\n";
  out << "loss     " << fmt(r.loss) << "\n";
  out << "top1     " << fmt(r.top1) << "\n";
  out << "top5     " << fmt(r.top5) << "\n";
  out << "top10    " << fmt(r.top10) << "\n";
  for (const auto& [type, acc] : r.per_type) out << "  " << type << "  " << fmt(acc) << "\n";
  nlohmann::ordered_json j;
  j["samples"] = r.num_samples;
  j["loss"] = r.loss;
  j["top1"] = r.top1;
  j["top5"] = r.top5;
  j["top10"] = r.top10;
  j["per_type"] = r.per_type;
  out << j.dump() << "\n";
}

int cmd_synth(const Args& a, std::ostream& out) {
  if (a.out.empty()) throw ValidationError("synth: --out is required");
  const Config config = build_config(a, Config());
  const SynthConfig sc = synth_config(config);
  const auto samples = synth_generate(sc, config.get_u64("train.seed"));
  write_synth(samples, a.out);
  out << "wrote " << samples.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

int cmd_train(const Args& a, std::ostream& out) {
  if (a.manifest.empty()) throw ValidationError("train: --manifest is required");
  if (a.out.empty()) throw ValidationError("train: --out is required");
  const Config config = build_config(a, Config());
  const TrainConfig tc = train_config(config);
  model_config(config).validate();

  const Manifest manifest = Manifest::load(a.manifest);
  const Manifest train_part = manifest.filter("train");
  Manifest val_part = a.val_manifest.empty() ? manifest.filter("val") : Manifest::load(a.val_manifest);
  if (train_part.records.empty()) throw ValidationError("train: manifest has no train records");

  const AnswerVocab vocab = build_answer_vocab(train_part, tc.max_vocab);
  const auto train_set = load_samples(train_part);
  const auto val_set = load_samples(val_part);

  std::optional<Checkpoint> resume;
  if (!a.checkpoint.empty()) resume = load_checkpoint(a.checkpoint);

  TrainOptions options;
  options.out_dir = std::filesystem::path(a.out);
  options.resume = resume ? &*resume : nullptr;
  options.on_record = [&](const MetricsRecord& r) { out << r.to_json() << "\n" << std::flush; };
  const TrainResult result = train(config, train_set, val_set, vocab, options);
  out << "best epoch " << result.best.epoch << " val top1 " << fmt(result.best.best_val_top1) << "\n";
  return kExitOk;
}

int cmd_eval(const Args& a, std::ostream& out) {
  if (a.checkpoint.empty()) throw ValidationError("eval: --checkpoint is required");
  if (a.manifest.empty()) throw ValidationError("eval: --manifest is required");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Config config = build_config(a, Config::parse(ck.config_echo));
  const ModelConfig mc = model_config(config);

  std::filesystem::path vocab_path = a.vocab;
  if (vocab_path.empty()) vocab_path = std::filesystem::path(a.checkpoint).parent_path() / "vocab.txt";
  const AnswerVocab vocab = AnswerVocab::load(vocab_path);
  const std::size_t classes = head_classes(ck.params);
  if (vocab.size() != classes) {
    throw ValidationError("eval: vocabulary has " + std::to_string(vocab.size()) + " classes but the checkpoint head has " +
                          std::to_string(classes));
  }

  Manifest manifest = Manifest::load(a.manifest);
  if (a.split != "all") manifest = manifest.filter(a.split);
  const auto samples = load_samples(manifest);

  std::vector<std::vector<double>> logits;
  const EvalReport report = evaluate(mc, ck.params, samples, vocab, a.logits_path.empty() ? nullptr : &logits);
  print_report(out, report);
  if (!a.logits_path.empty()) {
    std::ofstream f(a.logits_path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.logits_path);
    f << std::setprecision(17);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      f << samples[i].bundle.sample_id << '\t' << vocab.id(samples[i].bundle.answer);
      for (double v : logits[i]) f << '\t' << v;
      f << '\n';
    }
  }
  return kExitOk;
}

int cmd_gradcheck(const Args& a, std::ostream& out) {
  const Config config = build_config(a, tiny_config());
  const ModelConfig mc = model_config(config);
  mc.validate();
  const GradCheckConfig gc = gradcheck_config(config);
  const GradCheckReport report = grad_check(mc, gc, config.get_u64("train.seed"));
  out << std::left << std::setw(34) << "path" << std::setw(8) << "coords" << std::setw(14) << "max_error"
      << "max_abs\n";
  for (const auto& p : report.paths) {
    out << std::left << std::setw(34) << p.path << std::setw(8) << p.coords << std::setw(14) << std::scientific
        << std::setprecision(3) << p.max_error << p.max_abs << std::defaultfloat << "\n";
  }
  out << "max error " << std::scientific << std::setprecision(3) << report.max_error << std::defaultfloat << " at "
      << report.worst_path << " (tolerance " << gc.tolerance << ")\n";
  return report.max_error <= gc.tolerance ? kExitOk : kExitRuntime;
}

void describe(std::ostream& out, const std::string& name, const Tensor& t) {
  double lo = t.data()[0], hi = lo, sum = 0.0, sq = 0.0;
  for (double v : t.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(t.numel());
  const double mean = sum / n;
  out << name << "  " << shape_string(t.shape()) << "  min " << fmt(lo) << "  max " << fmt(hi) << "  mean "
      << fmt(mean) << "  std " << fmt(std::sqrt(std::max(0.0, sq / n - mean * mean))) << "\n";
}

int cmd_inspect(const Args& a, std::ostream& out) {
  if (a.bundle.empty()) throw ValidationError("inspect: a bundle path is required");
  const FeatureBundle b = load_feature_bundle(a.bundle);
  out << "sample_id  " << b.sample_id << "\n";
  out << "answer     " << b.answer << "\n";
  out << "tokens    ";
  for (const auto& t : b.question_tokens) out << " " << t;
  out << "\n";
  describe(out, "audio   ", b.audio);
  describe(out, "question", b.question_embeddings);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio question answering with hybrid and multi-scale window attention", "mwafm"};
  app.require_subcommand(1);
  app.footer(keys_footer());
  Args a;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", a.overrides, "override one config key (key=value), repeatable")->allow_extra_args(false);
    sub->add_option("--seed", a.seed, "seed (overrides train.seed)");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic sound-event dataset");
  common(synth);
  synth->add_option("--out", a.out, "output directory");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  common(train_cmd);
  train_cmd->add_option("--manifest", a.manifest, "manifest with train (and val) records");
  train_cmd->add_option("--val-manifest", a.val_manifest, "separate validation manifest");
  train_cmd->add_option("--checkpoint", a.checkpoint, "resume from this checkpoint");
  train_cmd->add_option("--out", a.out, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  common(eval_cmd);
  eval_cmd->add_option("--checkpoint", a.checkpoint, "checkpoint file");
  eval_cmd->add_option("--manifest", a.manifest, "manifest to evaluate");
  eval_cmd->add_option("--split", a.split, "split to evaluate (train, val, test or all)");
  eval_cmd->add_option("--vocab", a.vocab, "answer vocabulary (default: vocab.txt beside the checkpoint)");
  eval_cmd->add_option("--logits", a.logits_path, "write per-sample logits here");

  auto* gc_cmd = app.add_subcommand("gradcheck", "compare autodiff with finite differences");
  common(gc_cmd);

  auto* inspect = app.add_subcommand("inspect", "print a feature bundle's shapes and statistics");
  inspect->add_option("bundle", a.bundle, "bundle file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (synth->parsed()) return cmd_synth(a, out);
    if (train_cmd->parsed()) return cmd_train(a, out);
    if (eval_cmd->parsed()) return cmd_eval(a, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(a, out);
    if (inspect->parsed()) return cmd_inspect(a, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace mwafm
