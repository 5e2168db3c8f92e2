#include "mwafm/synth.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mwafm/error.hpp"

namespace mwafm {

namespace {

using Rng64 = std::mt19937_64;

Rng64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng64(seq);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t uniform_int(Rng64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<double> gaussian_vector(Rng64& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

struct Span {
  std::size_t type;
  std::size_t length;
};

bool fits(const std::vector<Span>& spans, std::size_t seconds) {
  std::size_t total = spans.size() - 1;
  for (const auto& s : spans) total += s.length;
  return total <= seconds;
}

/// Random non-overlapping placement with at least one background second
/// between consecutive spans.
std::vector<SynthEvent> place(std::vector<Span> spans, std::size_t seconds, Rng64& rng) {
  std::shuffle(spans.begin(), spans.end(), rng);
  std::size_t used = spans.size() - 1;
  for (const auto& s : spans) used += s.length;
  std::vector<std::size_t> gaps(spans.size() + 1, 0);
  for (std::size_t i = 1; i + 1 < gaps.size(); ++i) gaps[i] = 1;
  for (std::size_t extra = seconds - used; extra > 0; --extra) ++gaps[uniform_int(rng, 0, gaps.size() - 1)];
  std::vector<SynthEvent> events;
  std::size_t cursor = gaps[0];
  for (std::size_t i = 0; i < spans.size(); ++i) {
    events.push_back({spans[i].type, cursor, spans[i].length});
    cursor += spans[i].length + gaps[i + 1];
  }
  return events;
}

std::vector<std::size_t> distinct_types(Rng64& rng, std::size_t available, std::size_t count) {
  std::vector<std::size_t> all(available);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  return all;
}

class Generator {
 public:
  Generator(const SynthConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
    auto rng = make_rng(seed, 1);
    ambient_ = gaussian_vector(rng, kAudioChannels, 0.5);
    for (std::size_t k = 0; k < config.event_types; ++k) signatures_.push_back(gaussian_vector(rng, kAudioChannels, 1.0));
  }

  SynthSample sample(Rng64& rng, const std::string& split, std::size_t index) {
    const auto& kind = config_.templates[uniform_int(rng, 0, config_.templates.size() - 1)];
    const std::size_t seconds = uniform_int(rng, config_.min_seconds, config_.max_seconds);
    SynthSample s;
    s.split = split;
    s.question_type = kind;
    std::vector<std::string> tokens;
    std::string answer;
    if (kind == "presence") {
      const std::size_t k = uniform_int(rng, 1, std::min<std::size_t>(3, config_.event_types - 1));
      auto types = distinct_types(rng, config_.event_types, config_.event_types);
      std::vector<Span> spans;
      for (std::size_t i = 0; i < k; ++i) spans.push_back({types[i], mixed_length(rng)});
      shrink_to_fit(spans, seconds);
      const bool yes = uniform_int(rng, 0, 1) == 1;
      const std::size_t asked = yes ? types[uniform_int(rng, 0, k - 1)] : types[uniform_int(rng, k, types.size() - 1)];
      tokens = {"is", "there", "a", event_name(asked), "sound"};
      s.events = place(std::move(spans), seconds, rng);
    } else if (kind == "longest") {
      const std::size_t distractors = uniform_int(rng, 1, std::min<std::size_t>(2, config_.event_types - 1));
      auto types = distinct_types(rng, config_.event_types, distractors + 1);
      std::vector<Span> spans{{types[0], uniform_int(rng, config_.long_min, config_.long_max)}};
      for (std::size_t d = 1; d <= distractors; ++d) {
        const std::size_t bursts = uniform_int(rng, 1, 3);
        for (std::size_t b = 0; b < bursts; ++b) spans.push_back({types[d], short_length(rng)});
      }
      while (!fits(spans, seconds) && spans[0].length > config_.long_min) --spans[0].length;
      while (!fits(spans, seconds) && spans.size() > 2) spans.pop_back();
      tokens = {"which", "sound", "lasts", "the", "longest"};
      s.events = place(std::move(spans), seconds, rng);
    } else {
      const std::size_t k = uniform_int(rng, 1, config_.max_count);
      auto types = distinct_types(rng, config_.event_types, k);
      std::vector<Span> spans;
      for (auto t : types) spans.push_back({t, mixed_length(rng)});
      shrink_to_fit(spans, seconds);
      tokens = {"how", "many", "distinct", "sounds", "are", "there"};
      s.events = place(std::move(spans), seconds, rng);
    }
    answer = answer_from_events(kind, tokens, s.events);

    FeatureBundle& b = s.bundle;
    std::ostringstream id;
    id << split << '_' << std::setw(5) << std::setfill('0') << index;
    b.sample_id = id.str();
    b.answer = answer;
    b.audio = Tensor({seconds, kAudioChannels});
    std::vector<const std::vector<double>*> source(seconds, &ambient_);
    for (const auto& e : s.events) {
      for (std::size_t t = e.start; t < e.start + e.length; ++t) source[t] = &signatures_[e.type];
    }
    std::normal_distribution<double> noise(0.0, config_.noise);
    for (std::size_t t = 0; t < seconds; ++t) {
      auto row = b.audio.row(t);
      for (std::size_t c = 0; c < kAudioChannels; ++c) row[c] = (*source[t])[c] + noise(rng);
    }
    b.question_tokens = tokens;
    b.question_embeddings = Tensor({tokens.size(), kQuestionChannels});
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& emb = token_embedding(tokens[i]);
      std::copy(emb.begin(), emb.end(), b.question_embeddings.row(i).begin());
    }
    return s;
  }

 private:
  std::size_t short_length(Rng64& rng) const { return uniform_int(rng, config_.short_min, config_.short_max); }
  std::size_t long_length(Rng64& rng) const { return uniform_int(rng, config_.long_min, config_.long_max); }
  std::size_t mixed_length(Rng64& rng) const {
    return uniform_int(rng, 0, 1) ? long_length(rng) : short_length(rng);
  }

  void shrink_to_fit(std::vector<Span>& spans, std::size_t seconds) const {
    for (auto& s : spans) {
      if (fits(spans, seconds)) return;
      s.length = std::min(s.length, config_.short_max);
    }
    while (!fits(spans, seconds)) {
      auto it = std::max_element(spans.begin(), spans.end(), [](auto& a, auto& b) { return a.length < b.length; });
      if (it->length <= 1) throw ValidationError("synth: audio too short for the requested events");
      --it->length;
    }
  }

  const std::vector<double>& token_embedding(const std::string& token) {
    auto it = tokens_.find(token);
    if (it == tokens_.end()) {
      auto rng = make_rng(seed_, 2, fnv1a(token));
      it = tokens_.emplace(token, gaussian_vector(rng, kQuestionChannels, 1.0)).first;
    }
    return it->second;
  }

  SynthConfig config_;
  std::uint64_t seed_;
  std::vector<double> ambient_;
  std::vector<std::vector<double>> signatures_;
  std::map<std::string, std::vector<double>> tokens_;
};

}  // namespace

void SynthConfig::validate() const {
  if (event_types < 2) throw ValidationError("synth.event_types must be at least 2");
  if (min_seconds < 1 || min_seconds > max_seconds) throw ValidationError("synth seconds range is empty");
  if (short_min < 1 || short_min > short_max) throw ValidationError("synth short event range is empty");
  if (long_min > long_max) throw ValidationError("synth long event range is empty");
  if (long_min <= short_max) throw ValidationError("synth long events must be longer than short events");
  if (long_min + short_max + 1 > min_seconds) {
    throw ValidationError("synth.min_seconds too small to hold a long event and distractors");
  }
  if (max_count < 1 || max_count > event_types) throw ValidationError("synth.max_count must lie in [1, event_types]");
  if ((max_count - 1) + max_count * short_max > min_seconds) {
    throw ValidationError("synth.min_seconds too small for synth.max_count short events");
  }
  if (!(noise >= 0.0)) throw ValidationError("synth.noise must be non-negative");
  if (templates.empty()) throw ValidationError("synth.templates is empty");
  for (const auto& t : templates) {
    if (t != "presence" && t != "longest" && t != "count") {
      throw ValidationError("unknown synth template '" + t + "' (expected presence|longest|count)");
    }
  }
}

std::string event_name(std::size_t type) { return "event_" + std::to_string(type); }

std::string answer_from_events(const std::string& question_type, const std::vector<std::string>& tokens,
                               const std::vector<SynthEvent>& events) {
  if (question_type == "presence") {
    const std::string& asked = tokens.at(3);
    const bool present =
        std::any_of(events.begin(), events.end(), [&](const SynthEvent& e) { return event_name(e.type) == asked; });
    return present ? "yes" : "no";
  }
  if (question_type == "longest") {
    auto it = std::max_element(events.begin(), events.end(),
                               [](const SynthEvent& a, const SynthEvent& b) { return a.length < b.length; });
    return event_name(it->type);
  }
  if (question_type == "count") {
    std::set<std::size_t> types;
    for (const auto& e : events) types.insert(e.type);
    return std::to_string(types.size());
  }
  throw ValidationError("unknown question type '" + question_type + "'");
}

std::vector<SynthSample> synth_generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Generator gen(config, seed);
  auto rng = make_rng(seed, 3);
  std::vector<SynthSample> out;
  out.reserve(config.train + config.val + config.test);
  for (const auto& [split, count] : {std::pair<std::string, std::size_t>{"train", config.train},
                                     {"val", config.val},
                                     {"test", config.test}}) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(gen.sample(rng, split, i));
  }
  return out;
}

Manifest synth_manifest(const std::vector<SynthSample>& samples) {
  Manifest m;
  for (const auto& s : samples) {
    m.records.push_back({s.bundle.sample_id, "bundles/" + s.bundle.sample_id + ".mwaf", s.bundle.answer, s.split,
                         s.question_type});
  }
  return m;
}

std::vector<Sample> synth_split(const std::vector<SynthSample>& samples, const std::string& split) {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (s.split == split) out.push_back(Sample{s.bundle, s.question_type});
  }
  return out;
}

void write_synth(const std::vector<SynthSample>& samples, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "bundles", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "bundles").string() + ": " + ec.message());
  for (const auto& s : samples) write_feature_bundle(s.bundle, out_dir / "bundles" / (s.bundle.sample_id + ".mwaf"));
  const Manifest all = synth_manifest(samples);
  for (const char* split : {"train", "val", "test"}) all.filter(split).save(out_dir / (std::string(split) + ".tsv"));

  std::ofstream events(out_dir / "events.tsv", std::ios::binary | std::ios::trunc);
  if (!events) throw IoError("cannot write " + (out_dir / "events.tsv").string());
  for (const auto& s : samples) {
    events << s.bundle.sample_id;
    for (const auto& e : s.events) events << '\t' << e.type << ':' << e.start << ':' << e.length;
    events << '\n';
  }
}

}  // namespace mwafm
