#include "mwafm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mwafm/error.hpp"

namespace mwafm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

const std::vector<ConfigKey>& Config::keys() {
  static const std::vector<ConfigKey> registry = {
      {"model.d", "512", "model width after the input projections"},
      {"model.heads", "4", "attention heads in every multi-head block (must divide model.d)"},
      {"model.audio_dim", "128", "audio feature channels per second"},
      {"model.question_dim", "300", "word embedding channels"},
      {"model.audio_len", "24", "audio length after time interpolation"},
      {"model.question_len", "20", "question length after padding/truncation"},
      {"model.dropout", "0.1", "dropout rate before each aggregation ReLU"},
      {"model.ln_eps", "1e-5", "layer normalization epsilon"},
      {"model.mwafm_star_layers", "0", "ablation MWAFM*: replace MWAM by N stacked hybrid attention passes (0 = off)"},
      {"aham.enabled", "true", "ablation w/o AHAM when false"},
      {"aham.cross_mode", "gate", "question-to-audio merge: gate | context"},
      {"mwam.enabled", "true", "ablation w/o MWAM when false"},
      {"mwam.windows", "2,4,6,12", "window sizes (even, non-decreasing); one size = w/ ws-attn, 12,12,12,12 = MWAFM'"},
      {"mwam.share_scale_params", "false", "share one set of per-scale weights across all windows"},
      {"mwam.audio_once", "false", "add the pooled audio summand once instead of once per scale"},
      {"train.lr", "1e-4", "Adam learning rate"},
      {"train.batch_size", "64", "minibatch size"},
      {"train.epochs", "50", "training epochs"},
      {"train.adam_beta1", "0.9", "Adam first-moment decay"},
      {"train.adam_beta2", "0.999", "Adam second-moment decay"},
      {"train.adam_eps", "1e-8", "Adam denominator epsilon"},
      {"train.seed", "0", "seed for initialization, shuffling and dropout"},
      {"train.max_vocab", "1000", "maximum answers kept in the vocabulary (plus <unk>)"},
      {"train.stop_at_top1", "0", "stop once validation top-1 reaches this value (0 = never)"},
      {"gradcheck.eps", "1e-6", "central difference step"},
      {"gradcheck.coords", "5", "random coordinates probed per parameter tensor"},
      {"gradcheck.tolerance", "1e-6", "maximum allowed error"},
      {"gradcheck.floor", "1e-3", "relative error denominator floor: |a-n| / max(|a|, |n|, floor)"},
      {"gradcheck.paths", "", "only check parameter paths starting with one of these prefixes (empty = all)"},
      {"gradcheck.batch", "2", "samples in the random probe batch"},
      {"gradcheck.classes", "5", "answer classes of the probe head"},
      {"synth.train", "2000", "generated train samples"},
      {"synth.val", "0", "generated validation samples"},
      {"synth.test", "500", "generated test samples"},
      {"synth.event_types", "8", "distinct sound event types"},
      {"synth.min_seconds", "15", "shortest clip in seconds"},
      {"synth.max_seconds", "30", "longest clip in seconds"},
      {"synth.short_len", "1,3", "short event length range in seconds"},
      {"synth.long_len", "8,15", "long event length range in seconds"},
      {"synth.max_count", "4", "largest answer of the counting template"},
      {"synth.noise", "0.2", "standard deviation of per-second feature noise"},
      {"synth.templates", "presence", "question templates: presence, longest, count"},
  };
  return registry;
}

Config::Config() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

Config Config::parse(std::string_view text) {
  Config c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    c.set(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key '" + key + "'");
  it->second = value;
}

void Config::apply(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ValidationError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const auto& text = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

std::size_t Config::get_size(const std::string& key) const { return parse_size(key, get(key)); }

std::uint64_t Config::get_u64(const std::string& key) const {
  const auto& text = get(key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("config key '" + key + "': expected an unsigned integer, got '" + text + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const auto& text = get(key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValidationError("config key '" + key + "': expected true|false, got '" + text + "'");
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_commas(get(key))) out.push_back(parse_size(key, item));
  return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key) const { return split_commas(get(key)); }

std::string Config::echo() const {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + values_.at(k.name) + "\n";
  return out;
}

void ModelConfig::validate() const {
  if (d == 0 || heads == 0 || audio_dim == 0 || question_dim == 0 || audio_len == 0 || question_len == 0) {
    throw ValidationError("model dimensions must be positive");
  }
  if (d % heads != 0) {
    throw ValidationError("model.heads=" + std::to_string(heads) + " does not divide model.d=" + std::to_string(d));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("model.dropout must lie in [0, 1)");
  if (!(ln_eps > 0.0)) throw ValidationError("model.ln_eps must be positive");
  validate_windows(mwam.windows, false);
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("train.lr must be positive");
  if (batch_size == 0) throw ValidationError("train.batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("train.adam_eps must be positive");
  if (max_vocab == 0) throw ValidationError("train.max_vocab must be positive");
  if (!(stop_at_top1 >= 0.0 && stop_at_top1 <= 1.0)) throw ValidationError("train.stop_at_top1 must lie in [0, 1]");
}

ModelConfig model_config(const Config& c) {
  ModelConfig m;
  m.d = c.get_size("model.d");
  m.heads = c.get_size("model.heads");
  m.audio_dim = c.get_size("model.audio_dim");
  m.question_dim = c.get_size("model.question_dim");
  m.audio_len = c.get_size("model.audio_len");
  m.question_len = c.get_size("model.question_len");
  m.dropout = c.get_double("model.dropout");
  m.ln_eps = c.get_double("model.ln_eps");
  m.star_layers = c.get_size("model.mwafm_star_layers");
  m.aham.enabled = c.get_bool("aham.enabled");
  m.aham.cross_mode = parse_cross_mode(c.get("aham.cross_mode"));
  m.aham.ln_eps = m.ln_eps;
  m.mwam_enabled = c.get_bool("mwam.enabled");
  m.share_scale_params = c.get_bool("mwam.share_scale_params");
  m.mwam.windows = c.get_size_list("mwam.windows");
  m.mwam.audio_once = c.get_bool("mwam.audio_once");
  m.mwam.dropout = m.dropout;
  m.mwam.ln_eps = m.ln_eps;
  m.validate();
  return m;
}

TrainConfig train_config(const Config& c) {
  TrainConfig t;
  t.lr = c.get_double("train.lr");
  t.batch_size = c.get_size("train.batch_size");
  t.epochs = c.get_size("train.epochs");
  t.beta1 = c.get_double("train.adam_beta1");
  t.beta2 = c.get_double("train.adam_beta2");
  t.adam_eps = c.get_double("train.adam_eps");
  t.seed = c.get_u64("train.seed");
  t.max_vocab = c.get_size("train.max_vocab");
  t.stop_at_top1 = c.get_double("train.stop_at_top1");
  t.validate();
  return t;
}

SynthConfig synth_config(const Config& c) {
  SynthConfig s;
  s.train = c.get_size("synth.train");
  s.val = c.get_size("synth.val");
  s.test = c.get_size("synth.test");
  s.event_types = c.get_size("synth.event_types");
  s.min_seconds = c.get_size("synth.min_seconds");
  s.max_seconds = c.get_size("synth.max_seconds");
  const auto short_len = c.get_size_list("synth.short_len");
  const auto long_len = c.get_size_list("synth.long_len");
  if (short_len.size() != 2 || long_len.size() != 2) {
    throw ValidationError("synth.short_len and synth.long_len take two values: min,max");
  }
  s.short_min = short_len[0];
  s.short_max = short_len[1];
  s.long_min = long_len[0];
  s.long_max = long_len[1];
  s.max_count = c.get_size("synth.max_count");
  s.noise = c.get_double("synth.noise");
  s.templates = c.get_string_list("synth.templates");
  s.validate();
  return s;
}

GradCheckConfig gradcheck_config(const Config& c) {
  GradCheckConfig g;
  g.eps = c.get_double("gradcheck.eps");
  g.coords = c.get_size("gradcheck.coords");
  g.tolerance = c.get_double("gradcheck.tolerance");
  g.floor = c.get_double("gradcheck.floor");
  g.paths = c.get_string_list("gradcheck.paths");
  g.batch = c.get_size("gradcheck.batch");
  g.classes = c.get_size("gradcheck.classes");
  if (!(g.eps > 0.0) || g.coords == 0 || g.batch == 0 || g.classes < 2) {
    throw ValidationError("gradcheck needs eps > 0, coords >= 1, batch >= 1 and classes >= 2");
  }
  return g;
}

Config tiny_config() {
  Config c;
  c.set("model.d", "16");
  c.set("model.heads", "2");
  c.set("model.audio_dim", "8");
  c.set("model.question_dim", "10");
  c.set("model.audio_len", "6");
  c.set("model.question_len", "4");
  c.set("mwam.windows", "2,4");
  return c;
}

}  // namespace mwafm
