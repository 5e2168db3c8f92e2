#include "mwafm/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mwafm/error.hpp"

namespace mwafm {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::map<std::string, std::set<std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 4 && f.size() != 5) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 4 or 5 tab-separated fields, got " +
                            std::to_string(f.size()));
    }
    ManifestRecord r{f[0], f[1], f[2], f[3], f.size() == 5 ? f[4] : "all"};
    if (r.split != "train" && r.split != "val" && r.split != "test") {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": unknown split '" + r.split + "'");
    }
    if (!seen[r.split].insert(r.sample_id).second) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": duplicate sample id '" + r.sample_id +
                            "' in split " + r.split);
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void Manifest::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  for (const auto& r : records) {
    out << r.sample_id << '\t' << r.bundle_path << '\t' << r.answer << '\t' << r.split;
    if (r.question_type != "all") out << '\t' << r.question_type;
    out << '\n';
  }
  write_text(path, out.str());
}

Manifest Manifest::filter(const std::string& split) const {
  Manifest m;
  m.base_dir = base_dir;
  for (const auto& r : records) {
    if (r.split == split) m.records.push_back(r);
  }
  return m;
}

std::filesystem::path Manifest::resolve(const ManifestRecord& record) const {
  std::filesystem::path p(record.bundle_path);
  return p.is_absolute() ? p : base_dir / p;
}

AnswerVocab::AnswerVocab(std::vector<std::string> answers) : answers_(std::move(answers)) {
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    if (answers_[i] == kUnknown) throw ValidationError("vocabulary may not list the unknown token explicitly");
    if (!index_.emplace(answers_[i], i).second) throw ValidationError("duplicate answer '" + answers_[i] + "'");
  }
}

std::size_t AnswerVocab::id(const std::string& answer) const {
  auto it = index_.find(answer);
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& AnswerVocab::answer(std::size_t id) const {
  if (id == unk_id()) return unknown_;
  return answers_.at(id);
}

AnswerVocab AnswerVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty() || lines.back() != kUnknown) {
    throw ValidationError("vocabulary " + path.string() + " must end with a '<unk>' line");
  }
  lines.pop_back();
  return AnswerVocab(std::move(lines));
}

void AnswerVocab::save(const std::filesystem::path& path) const {
  std::string text;
  for (const auto& a : answers_) text += a + '\n';
  text += std::string(kUnknown) + '\n';
  write_text(path, text);
}

AnswerVocab build_answer_vocab(const Manifest& manifest, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : manifest.records) {
    if (r.split == "train" && r.answer != AnswerVocab::kUnknown) ++counts[r.answer];
  }
  if (counts.empty()) throw ValidationError("cannot build a vocabulary: no train-split answers");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already lexicographic; a stable sort keeps that order among ties.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> answers;
  answers.reserve(ranked.size());
  for (auto& [a, c] : ranked) answers.push_back(a);
  return AnswerVocab(std::move(answers));
}

std::vector<Sample> load_samples(const Manifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    FeatureBundle b = load_feature_bundle(manifest.resolve(r));
    if (b.answer != r.answer) {
      throw ValidationError("sample '" + r.sample_id + "': manifest answer '" + r.answer + "' differs from bundle '" +
                            b.answer + "'");
    }
    out.push_back(Sample{std::move(b), r.question_type});
  }
  return out;
}

Batch make_batch(std::span<const FeatureBundle* const> bundles, const AnswerVocab& vocab, std::size_t audio_len,
                 std::size_t question_len) {
  if (bundles.empty()) throw ValidationError("make_batch: no samples");
  const std::size_t b = bundles.size();
  const std::size_t audio_dim = bundles.front()->audio.cols();
  const std::size_t question_dim = bundles.front()->question_embeddings.cols();
  Batch batch;
  batch.audio = Tensor({b, audio_len, audio_dim}, 0.0);
  batch.question = Tensor({b, question_len, question_dim}, 0.0);
  batch.audio_valid.assign(b, ValidMask(audio_len, true));
  batch.question_valid.assign(b, ValidMask(question_len, false));
  batch.labels.reserve(b);
  auto audio_out = batch.audio.data();
  auto question_out = batch.question.data();
  for (std::size_t i = 0; i < b; ++i) {
    const FeatureBundle& fb = *bundles[i];
    if (fb.audio.cols() != audio_dim || fb.question_embeddings.cols() != question_dim) {
      throw DimensionError("make_batch: sample '" + fb.sample_id + "' has channel counts " +
                           shape_string(fb.audio.shape()) + "/" + shape_string(fb.question_embeddings.shape()));
    }
    const Tensor audio = interpolate_time(fb.audio, audio_len);
    std::copy(audio.data().begin(), audio.data().end(), audio_out.begin() + i * audio_len * audio_dim);
    const std::size_t tokens = std::min(question_len, fb.question_embeddings.rows());
    std::copy_n(fb.question_embeddings.data().begin(), tokens * question_dim,
                question_out.begin() + i * question_len * question_dim);
    std::fill_n(batch.question_valid[i].begin(), tokens, true);
    batch.labels.push_back(vocab.id(fb.answer));
  }
  return batch;
}

Batch make_batch(std::span<const FeatureBundle> bundles, const AnswerVocab& vocab, std::size_t audio_len,
                 std::size_t question_len) {
  std::vector<const FeatureBundle*> ptrs;
  ptrs.reserve(bundles.size());
  for (const auto& b : bundles) ptrs.push_back(&b);
  return make_batch(std::span<const FeatureBundle* const>(ptrs), vocab, audio_len, question_len);
}

}  // namespace mwafm
