#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mmhs/embedding_file.hpp"
#include "mmhs/errors.hpp"
#include "mmhs/text_pipeline.hpp"
#include "test_support.hpp"

using namespace mmhs;
using namespace mmhs::text;
using namespace mmhs::testing;

namespace {

std::string repeat_word(const std::string& w, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + w;
  return s;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Preprocess, Examples) {
  EXPECT_EQ(preprocess_text("@user check https://x.co NOW!!"), "check now!!");
  EXPECT_EQ(preprocess_text("plain words"), "plain words");
  EXPECT_EQ(preprocess_text("is this #hate? yes..."), "is this hate? yes");
  EXPECT_EQ(preprocess_text("visit www.example.com   today"), "visit today");
  EXPECT_EQ(preprocess_text(""), "");
}

TEST(Preprocess, IdempotentOnRandomText) {
  const std::string alphabet = "abcXYZ019 !?@#.:/_-\t\nhttps://www.\xC3\xA9";
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const std::size_t len = rng() % 80;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    const auto once = preprocess_text(s);
    EXPECT_EQ(preprocess_text(once), once) << s;
  }
}

TEST(Tokenize, EmptyStringIsClsPlusPadding) {
  const auto seq = tokenize("", Vocabulary::demo());
  EXPECT_EQ(seq.tokens[0], kClsId);
  EXPECT_EQ(seq.attention_length, 1u);
  for (std::size_t i = 1; i < kSequenceLength; ++i) EXPECT_EQ(seq.tokens[i], kPadId);
}

TEST(Tokenize, ExactlyFullSequenceHasNoPadding) {
  const auto& vocab = Vocabulary::demo();
  const auto the = *vocab.find("the");
  const auto seq = tokenize(repeat_word("the", 127), vocab);
  EXPECT_EQ(seq.attention_length, 128u);
  EXPECT_EQ(seq.tokens[0], kClsId);
  for (std::size_t i = 1; i < kSequenceLength; ++i) EXPECT_EQ(seq.tokens[i], the);
}

TEST(Tokenize, LongTextIsTruncated) {
  const auto& vocab = Vocabulary::demo();
  std::string text;
  for (int i = 0; i < 150; ++i) text += (i % 2 ? " hate" : " the");
  const auto pieces = wordpiece(text, vocab);
  ASSERT_EQ(pieces.size(), 150u);
  const auto seq = tokenize(text, vocab);
  EXPECT_EQ(seq.attention_length, 128u);
  for (std::size_t i = 0; i < 127; ++i) EXPECT_EQ(seq.tokens[i + 1], pieces[i]);
}

TEST(Tokenize, WordPieceGreedyLongestMatch) {
  const auto vocab = Vocabulary::from_lines({"[PAD]", "[CLS]", "[UNK]", "un", "##aff", "##able", "aff", "!", "?"});
  EXPECT_EQ(wordpiece("unaffable", vocab), (std::vector<std::int32_t>{3, 4, 5}));
  EXPECT_EQ(wordpiece("unknownword", vocab), (std::vector<std::int32_t>{kUnkId}));
  EXPECT_EQ(wordpiece("aff!?", vocab), (std::vector<std::int32_t>{6, 7, 8}));
  EXPECT_EQ(basic_split("a!b ?c"), (std::vector<std::string>{"a", "!", "b", "?", "c"}));
  EXPECT_THROW(Vocabulary::from_lines({"[CLS]", "[PAD]", "[UNK]"}), FormatError);
}

TEST(Tokenize, FuzzKeepsInvariants) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const std::size_t len = rng() % 2000;
    for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char>(rng() % 256));
    const auto seq = tokenize(s, Vocabulary::demo());
    ASSERT_EQ(seq.tokens[0], kClsId);
    ASSERT_GE(seq.attention_length, 1u);
    ASSERT_LE(seq.attention_length, kSequenceLength);
    for (std::size_t i = 0; i < kSequenceLength; ++i) {
      ASSERT_GE(seq.tokens[i], 0);
      ASSERT_LT(static_cast<std::size_t>(seq.tokens[i]), Vocabulary::demo().size());
      if (i >= seq.attention_length) ASSERT_EQ(seq.tokens[i], kPadId);
    }
  }
}

TEST(Vocabulary, DemoHasUniqueEntriesAndSpecialTokens) {
  const auto& v = Vocabulary::demo();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_TRUE(seen.insert(v.token(static_cast<std::int32_t>(i))).second);
  EXPECT_EQ(v.token(kPadId), "[PAD]");
  EXPECT_EQ(v.token(kClsId), "[CLS]");
  EXPECT_EQ(v.token(kUnkId), "[UNK]");
}

TEST(StubEmbed, DeterministicFiniteAndSized) {
  const auto seq = tokenize("you are all vermin", Vocabulary::demo());
  for (auto mode : {PoolingMode::Cls, PoolingMode::MeanPool}) {
    const auto a = stub_embed(seq, mode);
    const auto b = stub_embed(seq, mode);
    EXPECT_EQ(a.values, b.values);
    ASSERT_EQ(a.values.size(), kEmbeddingDim);
    for (double v : a.values) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(StubEmbed, MeanOfSingleTokenIsItsUnitVector) {
  const auto seq = tokenize("", Vocabulary::demo());
  const auto e = stub_embed(seq, PoolingMode::MeanPool);
  EXPECT_EQ(e.values, StubEmbeddingProvider::token_vector(kClsId));
  EXPECT_NEAR(norm(e.values), 1.0, 1e-12);
  for (std::int32_t id : {3, 50, 999}) EXPECT_NEAR(norm(StubEmbeddingProvider::token_vector(id)), 1.0, 1e-12);
}

TEST(StubEmbed, MeanPoolExcludesPaddingAndIgnoresOrder) {
  const auto& vocab = Vocabulary::demo();
  const auto a = tokenize("the hate", vocab);
  const auto b = tokenize("hate the", vocab);
  const auto ea = stub_embed(a, PoolingMode::MeanPool).values;
  const auto eb = stub_embed(b, PoolingMode::MeanPool).values;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) EXPECT_NEAR(ea[i], eb[i], 1e-15);

  std::vector<double> oracle(kEmbeddingDim, 0.0);
  for (auto id : a.active()) {
    const auto v = StubEmbeddingProvider::token_vector(id);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) oracle[i] += v[i] / static_cast<double>(a.attention_length);
  }
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) EXPECT_NEAR(ea[i], oracle[i], 1e-15);
  EXPECT_NE(stub_embed(a, PoolingMode::Cls).values, stub_embed(b, PoolingMode::Cls).values);
}

TEST(StubEmbed, SingleTokenChangesGiveDistinctClsVectors) {
  // Every one-token substitution of a base sentence yields a distinct CLS vector.
  const auto& vocab = Vocabulary::demo();
  auto base = tokenize("the hate the", vocab);
  std::set<std::vector<double>> seen;
  std::set<std::uint64_t> hashes;
  for (std::int32_t id = 3; id < static_cast<std::int32_t>(vocab.size()); ++id) {
    auto seq = base;
    seq.tokens[2] = id;
    hashes.insert(StubEmbeddingProvider::sequence_hash(seq.active()));
    seen.insert(stub_embed(seq, PoolingMode::Cls).values);
  }
  EXPECT_EQ(hashes.size(), vocab.size() - 3);
  EXPECT_EQ(seen.size(), vocab.size() - 3);
}

TEST(Pooling, ParseRoundTrip) {
  EXPECT_EQ(parse_pooling_mode("cls"), PoolingMode::Cls);
  EXPECT_EQ(parse_pooling_mode("mean"), PoolingMode::MeanPool);
  EXPECT_EQ(parse_pooling_mode(to_string(PoolingMode::MeanPool)), PoolingMode::MeanPool);
  EXPECT_THROW(parse_pooling_mode("max"), ValidationError);
}

TEST(LoadEmbeddings, RoundTripEmptyAndWrongDimension) {
  TempDir dir("text");
  io::VectorTable table{768, {}};
  std::mt19937 rng(4);
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (int r = 0; r < 3; ++r) {
    io::VectorRecord rec{"clip_" + std::to_string(r), std::vector<float>(768)};
    for (float& v : rec.values) v = d(rng);
    table.records.push_back(rec);
  }
  io::write_embedding_file(dir / "t.mmeb", table);
  const auto map = load_embeddings(dir / "t.mmeb");
  ASSERT_EQ(map.size(), 3u);
  for (const auto& rec : table.records) {
    const auto& e = map.at(rec.id);
    for (std::size_t i = 0; i < 768; ++i) EXPECT_EQ(e.values[i], static_cast<double>(rec.values[i]));
  }
  const auto provider = FileEmbeddingProvider::open(dir / "t.mmeb");
  EXPECT_EQ(provider.embed("clip_1", TokenSequence{}, PoolingMode::Cls).values, map.at("clip_1").values);
  EXPECT_THROW(provider.embed("missing", TokenSequence{}, PoolingMode::Cls), ValidationError);

  io::write_embedding_file(dir / "empty.mmeb", io::VectorTable{768, {}});
  EXPECT_TRUE(load_embeddings(dir / "empty.mmeb").empty());

  // Hand-written header declaring dim 512.
  std::vector<std::uint8_t> bytes{'M', 'M', 'E', 'B'};
  put32(bytes, 1);
  put32(bytes, 0);
  put32(bytes, 512);
  io::write_file_atomic(dir / "bad.mmeb", bytes);
  try {
    load_embeddings(dir / "bad.mmeb");
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("768"), std::string::npos) << e.what();
  }

  io::write_embedding_file(dir / "speech.mmeb", io::VectorTable{510, {}});
  EXPECT_THROW(load_embeddings(dir / "speech.mmeb"), DimensionError);
}
