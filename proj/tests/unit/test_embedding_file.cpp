#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "mmhs/embedding_file.hpp"
#include "mmhs/errors.hpp"
#include "test_support.hpp"

using namespace mmhs;
using namespace mmhs::io;
using namespace mmhs::testing;

namespace {

VectorTable random_table(std::uint32_t dim, int records, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-2.0f, 2.0f);
  VectorTable t{dim, {}};
  for (int r = 0; r < records; ++r) {
    VectorRecord rec{"id_" + std::to_string(r) + (r % 2 ? "_\xC3\xA9" : ""), std::vector<float>(dim)};
    for (float& v : rec.values) v = d(rng);
    t.records.push_back(std::move(rec));
  }
  return t;
}

const std::uint32_t kEmbDims[] = {510, 768};

}  // namespace

TEST(VectorFile, HeaderLayoutIsLittleEndian) {
  VectorTable t{510, {{"ab", std::vector<float>(510, 1.0f)}}};
  const auto bytes = encode_vector_table(kEmbeddingMagic, t);
  ASSERT_EQ(bytes.size(), 16u + 2 + 2 + 510 * 4);
  EXPECT_EQ(std::memcmp(bytes.data(), "MMEB", 4), 0);
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 510 & 0xFF);
  EXPECT_EQ(bytes[13], 510 >> 8);
  EXPECT_EQ(bytes[16], 2);
  EXPECT_EQ(bytes[17], 0);
  EXPECT_EQ(bytes[18], 'a');
  float f;
  std::memcpy(&f, bytes.data() + 20, 4);
  EXPECT_EQ(f, 1.0f);
}

TEST(VectorFile, RoundTripIsExact) {
  TempDir dir("mmeb");
  for (std::uint32_t dim : kEmbDims) {
    const auto t = random_table(dim, 7, dim);
    write_embedding_file(dir / "x.mmeb", t);
    const auto back = read_embedding_file(dir / "x.mmeb");
    ASSERT_EQ(back.dim, dim);
    ASSERT_EQ(back.records.size(), t.records.size());
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      EXPECT_EQ(back.records[i].id, t.records[i].id);
      EXPECT_EQ(back.records[i].values, t.records[i].values);
    }
  }
  const auto f = random_table(1360, 2, 9);
  write_feature_file(dir / "f.mmfm", f);
  EXPECT_EQ(read_feature_file(dir / "f.mmfm").records[1].values, f.records[1].values);
  EXPECT_THROW(read_embedding_file(dir / "f.mmfm"), FormatError);
}

TEST(VectorFile, EveryTruncationIsRejected) {
  const auto bytes = encode_vector_table(kEmbeddingMagic, random_table(510, 3, 1));
  const std::uint32_t dims[] = {510};
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    std::span<const std::uint8_t> prefix(bytes.data(), cut);
    EXPECT_THROW(decode_vector_table(prefix, kEmbeddingMagic, dims), FormatError) << "cut " << cut;
  }
}

TEST(VectorFile, TruncatedRecordReportsOffset) {
  const auto bytes = encode_vector_table(kEmbeddingMagic, random_table(510, 2, 2));
  const std::uint32_t dims[] = {510};
  try {
    decode_vector_table(std::span(bytes.data(), bytes.size() - 10), kEmbeddingMagic, dims);
    FAIL();
  } catch (const CorruptionError& e) {
    EXPECT_GT(e.byte_offset(), 16u);
    EXPECT_LE(e.byte_offset(), bytes.size() - 10);
  }
}

TEST(VectorFile, BadMagicVersionDimAndTrailingBytes) {
  auto bytes = encode_vector_table(kEmbeddingMagic, random_table(768, 1, 3));
  const std::uint32_t dims[] = {510, 768};
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_vector_table(bad_magic, kEmbeddingMagic, dims), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_vector_table(bad_version, kEmbeddingMagic, dims), FormatError);
  auto bad_dim = bytes;
  bad_dim[12] = 0x00;
  bad_dim[13] = 0x02;  // 512
  EXPECT_THROW(decode_vector_table(bad_dim, kEmbeddingMagic, dims), DimensionError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_vector_table(trailing, kEmbeddingMagic, dims), CorruptionError);
  auto overcount = bytes;
  overcount[8] = 2;
  EXPECT_THROW(decode_vector_table(overcount, kEmbeddingMagic, dims), CorruptionError);
}

TEST(VectorFile, RandomCorruptionNeverCrashes) {
  const auto bytes = encode_vector_table(kEmbeddingMagic, random_table(510, 4, 4));
  const std::uint32_t dims[] = {510, 768};
  std::mt19937_64 rng(5);
  int rejected = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    auto b = bytes;
    const int flips = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < flips; ++i) b[rng() % 24] = static_cast<std::uint8_t>(rng());
    try {
      const auto t = decode_vector_table(b, kEmbeddingMagic, dims);
      for (const auto& r : t.records) ASSERT_EQ(r.values.size(), t.dim);
    } catch (const FormatError&) {
      ++rejected;
    } catch (const DimensionError&) {
      ++rejected;
    }
  }
  EXPECT_GT(rejected, 0);
}

TEST(VectorFile, MismatchedRecordLengthAndDuplicateIds) {
  VectorTable t{510, {{"a", std::vector<float>(509)}}};
  EXPECT_THROW(encode_vector_table(kEmbeddingMagic, t), DimensionError);
  VectorTable dup{510, {{"a", std::vector<float>(510)}, {"a", std::vector<float>(510)}}};
  const std::uint32_t dims[] = {510};
  EXPECT_THROW(decode_vector_table(encode_vector_table(kEmbeddingMagic, dup), kEmbeddingMagic, dims), FormatError);
}

TEST(VectorFile, MissingFileIsIoError) {
  TempDir dir("mmeb_io");
  EXPECT_THROW(read_embedding_file(dir / "nope.mmeb"), IoError);
  try {
    read_embedding_file(dir / "nope.mmeb");
  } catch (const Error& e) {
    EXPECT_EQ(e.exit_code(), 2);
  }
}
