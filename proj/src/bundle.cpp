#include "mwafm/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mwafm/error.hpp"

namespace mwafm {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr std::string_view kBundleMagic = "MWAF";

template <typename T>
void append_raw(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { append_raw(buffer_, v); }
void BinaryWriter::u64(std::uint64_t v) { append_raw(buffer_, v); }
void BinaryWriter::f64(double v) { append_raw(buffer_, v); }

void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buffer_.append(s);
}

void BinaryWriter::record(const TensorRecord& r) {
  string(r.name);
  u32(static_cast<std::uint32_t>(r.value.rank()));
  for (auto d : r.value.shape()) u32(static_cast<std::uint32_t>(d));
  const auto data = r.value.data();
  buffer_.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
}

void BinaryWriter::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

BinaryReader BinaryReader::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return BinaryReader(std::move(ss).str());
}

void BinaryReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) {
    throw FormatError(FormatErrorKind::truncated, "truncated payload: need " + std::to_string(n) + " bytes at offset " +
                                                      std::to_string(pos_) + ", have " +
                                                      std::to_string(data_.size() - pos_));
  }
}

void BinaryReader::expect_header(std::string_view magic) {
  if (data_.size() < magic.size() || std::string_view(data_).substr(0, magic.size()) != magic) {
    throw FormatError(FormatErrorKind::bad_magic, "bad magic: expected '" + std::string(magic) + "'");
  }
  pos_ = magic.size();
  const auto version = u32();
  if (version != kFormatVersion) {
    throw FormatError(FormatErrorKind::version_mismatch, "format version " + std::to_string(version) +
                                                             " is not supported (expected " +
                                                             std::to_string(kFormatVersion) + ")");
  }
}

std::string BinaryReader::bytes(std::size_t n) {
  need(n);
  std::string out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t BinaryReader::u32() {
  need(sizeof(std::uint32_t));
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, sizeof v);
  pos_ += sizeof v;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(sizeof(std::uint64_t));
  std::uint64_t v;
  std::memcpy(&v, data_.data() + pos_, sizeof v);
  pos_ += sizeof v;
  return v;
}

double BinaryReader::f64() {
  need(sizeof(double));
  double v;
  std::memcpy(&v, data_.data() + pos_, sizeof v);
  pos_ += sizeof v;
  return v;
}

std::string BinaryReader::string() { return bytes(u32()); }

TensorRecord BinaryReader::record() {
  TensorRecord r;
  r.name = string();
  const auto rank = u32();
  if (rank == 0 || rank > 8) {
    throw FormatError(FormatErrorKind::malformed, "record '" + r.name + "' has rank " + std::to_string(rank));
  }
  Shape shape;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = u32();
    if (d == 0) throw FormatError(FormatErrorKind::malformed, "record '" + r.name + "' has a zero dimension");
    shape.push_back(d);
    count *= d;
  }
  need(count * sizeof(double));
  std::vector<double> data(count);
  std::memcpy(data.data(), data_.data() + pos_, count * sizeof(double));
  pos_ += count * sizeof(double);
  r.value = Tensor(std::move(shape), std::move(data));
  if (!r.value.all_finite()) {
    throw FormatError(FormatErrorKind::non_finite, "record '" + r.name + "' contains non-finite values");
  }
  return r;
}

void FeatureBundle::validate() const {
  if (!audio.all_finite() || !question_embeddings.all_finite()) {
    throw FormatError(FormatErrorKind::non_finite, "bundle '" + sample_id + "' contains non-finite values");
  }
  if (audio.rank() != 2 || audio.cols() != kAudioChannels) {
    throw FormatError(FormatErrorKind::malformed,
                      "bundle '" + sample_id + "': audio must be [T x 128], got " + shape_string(audio.shape()));
  }
  if (question_embeddings.rank() != 2 || question_embeddings.cols() != kQuestionChannels) {
    throw FormatError(FormatErrorKind::malformed, "bundle '" + sample_id + "': question must be [N x 300], got " +
                                                      shape_string(question_embeddings.shape()));
  }
  if (question_tokens.size() != question_embeddings.rows()) {
    throw FormatError(FormatErrorKind::malformed, "bundle '" + sample_id + "': " +
                                                      std::to_string(question_tokens.size()) + " tokens for " +
                                                      std::to_string(question_embeddings.rows()) + " embeddings");
  }
}

std::string encode_feature_bundle(const FeatureBundle& bundle) {
  bundle.validate();
  BinaryWriter w;
  w.bytes(kBundleMagic);
  w.u32(kFormatVersion);
  w.record({"audio", bundle.audio});
  w.record({"question", bundle.question_embeddings});
  w.string(bundle.answer);
  w.u32(static_cast<std::uint32_t>(bundle.question_tokens.size()));
  for (const auto& t : bundle.question_tokens) w.string(t);
  w.string(bundle.sample_id);
  return w.buffer();
}

FeatureBundle decode_feature_bundle(std::string data) {
  BinaryReader r(std::move(data));
  r.expect_header(kBundleMagic);
  FeatureBundle b;
  for (const char* expected : {"audio", "question"}) {
    TensorRecord rec = r.record();
    if (rec.name != expected) {
      throw FormatError(FormatErrorKind::malformed, "expected record '" + std::string(expected) + "', found '" +
                                                        rec.name + "'");
    }
    (rec.name == "audio" ? b.audio : b.question_embeddings) = std::move(rec.value);
  }
  b.answer = r.string();
  const auto tokens = r.u32();
  for (std::uint32_t i = 0; i < tokens; ++i) b.question_tokens.push_back(r.string());
  b.sample_id = r.string();
  if (!r.at_end()) throw FormatError(FormatErrorKind::malformed, "trailing bytes after bundle metadata");
  b.validate();
  return b;
}

void write_feature_bundle(const FeatureBundle& bundle, const std::filesystem::path& path) {
  BinaryWriter w;
  w.bytes(encode_feature_bundle(bundle));
  w.save(path);
}

FeatureBundle load_feature_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_feature_bundle(std::move(data));
}

}  // namespace mwafm
