#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "bundle_gen.hpp"
#include "mwafm/bundle.hpp"
#include "mwafm/error.hpp"
#include "temp_dir.hpp"

using namespace mwafm;

namespace {

// Byte layout written by hand, independent of BinaryWriter.
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_str(std::string& s, const std::string& v) {
  put_u32(s, static_cast<std::uint32_t>(v.size()));
  s += v;
}
void put_record(std::string& s, const std::string& name, const Tensor& t) {
  put_str(s, name);
  put_u32(s, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(s, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put_u64(s, std::bit_cast<std::uint64_t>(v));
}

std::string manual_encode(const FeatureBundle& b) {
  std::string s = "MWAF";
  put_u32(s, 1);
  put_record(s, "audio", b.audio);
  put_record(s, "question", b.question_embeddings);
  put_str(s, b.answer);
  put_u32(s, static_cast<std::uint32_t>(b.question_tokens.size()));
  for (const auto& t : b.question_tokens) put_str(s, t);
  put_str(s, b.sample_id);
  return s;
}

FormatErrorKind decode_error(std::string data) {
  try {
    decode_feature_bundle(std::move(data));
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no FormatError";
  return FormatErrorKind::malformed;
}

}  // namespace

TEST(Bundle, EncodingMatchesByteLayout) {
  std::mt19937_64 rng(1);
  const FeatureBundle b = random_bundle(rng, "s0");
  EXPECT_EQ(encode_feature_bundle(b), manual_encode(b));
}

TEST(Bundle, FileRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(2);
  const FeatureBundle b = random_bundle(rng, "s1");
  write_feature_bundle(b, dir / "s1.mwaf");
  EXPECT_EQ(load_feature_bundle(dir / "s1.mwaf"), b);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(Bundle, SpecialValuesSurvive) {
  std::mt19937_64 rng(3);
  FeatureBundle b = random_bundle(rng, "s2");
  b.audio[0] = -0.0;
  b.audio[1] = 5e-324;
  b.audio[2] = 1.7976931348623157e308;
  const FeatureBundle back = decode_feature_bundle(encode_feature_bundle(b));
  EXPECT_TRUE(std::signbit(back.audio[0]));
  EXPECT_EQ(back.audio[1], 5e-324);
  EXPECT_EQ(back, b);
}

TEST(Bundle, BadMagic) {
  std::mt19937_64 rng(4);
  std::string data = encode_feature_bundle(random_bundle(rng, "x"));
  data[0] = 'X';
  EXPECT_EQ(decode_error(data), FormatErrorKind::bad_magic);
}

TEST(Bundle, VersionMismatch) {
  std::mt19937_64 rng(5);
  std::string data = encode_feature_bundle(random_bundle(rng, "x"));
  data[4] = 2;
  EXPECT_EQ(decode_error(data), FormatErrorKind::version_mismatch);
}

TEST(Bundle, TruncatedAtEveryPrefix) {
  std::mt19937_64 rng(6);
  FeatureBundle b = random_bundle(rng, "x");
  const std::string data = encode_feature_bundle(b);
  for (std::size_t n = 0; n < data.size(); n += 1 + n / 7) {
    try {
      decode_feature_bundle(data.substr(0, n));
      ADD_FAILURE() << "prefix " << n << " decoded";
    } catch (const FormatError&) {
    }
  }
}

TEST(Bundle, NonFiniteRejected) {
  std::mt19937_64 rng(7);
  FeatureBundle b = random_bundle(rng, "x");
  b.question_embeddings[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(decode_error(manual_encode(b)), FormatErrorKind::non_finite);
  EXPECT_THROW(encode_feature_bundle(b), FormatError);
}

TEST(Bundle, WrongChannelsRejected) {
  std::mt19937_64 rng(8);
  FeatureBundle b = random_bundle(rng, "x");
  b.audio = Tensor({3, 64});
  EXPECT_EQ(decode_error(manual_encode(b)), FormatErrorKind::malformed);
}

TEST(Bundle, TokenCountMustMatch) {
  std::mt19937_64 rng(9);
  FeatureBundle b = random_bundle(rng, "x");
  b.question_tokens.push_back("extra");
  EXPECT_EQ(decode_error(manual_encode(b)), FormatErrorKind::malformed);
}

TEST(Bundle, TrailingBytesRejected) {
  std::mt19937_64 rng(10);
  EXPECT_EQ(decode_error(encode_feature_bundle(random_bundle(rng, "x")) + "z"), FormatErrorKind::malformed);
}

TEST(Bundle, ExporterShapedBundleLoads) {
  TempDir dir;
  FeatureBundle b;
  b.audio = Tensor({15, kAudioChannels}, 0.25);
  b.question_embeddings = Tensor({3, kQuestionChannels}, -0.5);
  b.question_tokens = {"what", "is", "ringing"};
  b.answer = "bell";
  b.sample_id = "clip15";
  write_feature_bundle(b, dir / "clip15.mwaf");
  const FeatureBundle back = load_feature_bundle(dir / "clip15.mwaf");
  EXPECT_EQ(back.audio.shape(), (Shape{15, 128}));
  EXPECT_EQ(back.question_embeddings.shape(), (Shape{3, 300}));
  EXPECT_TRUE(back.audio.all_finite());
  EXPECT_TRUE(back.question_embeddings.all_finite());
}

TEST(Bundle, MissingFileIsIoError) {
  EXPECT_THROW(load_feature_bundle("/nonexistent/x.mwaf"), IoError);
}
