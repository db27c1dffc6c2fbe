#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmhs::text {

inline constexpr std::size_t kSequenceLength = 128;
inline constexpr std::size_t kEmbeddingDim = 768;
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kClsId = 1;
inline constexpr std::int32_t kUnkId = 2;
inline constexpr std::size_t kMaxCharsPerWord = 100;

// Drops @handles and URLs, keeps [a-z0-9], whitespace, '!' and '?', lowercases
// and collapses whitespace. Idempotent.
std::string preprocess_text(std::string_view raw);

// Token list where line number = id. Lines 0..2 must be [PAD], [CLS], [UNK].
class Vocabulary {
 public:
  static Vocabulary from_lines(std::vector<std::string> tokens);
  static Vocabulary from_file(const std::filesystem::path& path);
  // Built-in demonstration vocabulary (about 1k entries).
  static const Vocabulary& demo();

  std::optional<std::int32_t> find(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct TokenSequence {
  std::array<std::int32_t, kSequenceLength> tokens{};
  std::size_t attention_length = 1;
  bool has_cls = true;

  std::span<const std::int32_t> active() const { return std::span(tokens).first(attention_length); }
};

// Whitespace split, then '!' and '?' become standalone tokens.
std::vector<std::string> basic_split(std::string_view text);
// Greedy longest-match WordPiece; words with no full cover become [UNK].
std::vector<std::int32_t> wordpiece(std::string_view text, const Vocabulary& vocab);
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

enum class PoolingMode { Cls, MeanPool };
std::string_view to_string(PoolingMode mode);
PoolingMode parse_pooling_mode(std::string_view text);

struct TextEmbedding {
  std::vector<double> values;
  PoolingMode mode = PoolingMode::Cls;
  std::string provider_tag;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Deterministic; always returns kEmbeddingDim values.
  virtual TextEmbedding embed(std::string_view id, const TokenSequence& sequence, PoolingMode mode) const = 0;
};

// Unit-norm pseudo-random vector per token id; CLS mode uses a vector seeded by
// a 64-bit hash of the whole active id sequence.
class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  TextEmbedding embed(std::string_view id, const TokenSequence& sequence, PoolingMode mode) const override;

  static std::vector<double> token_vector(std::int32_t token_id);
  static std::uint64_t sequence_hash(std::span<const std::int32_t> ids);
};

TextEmbedding stub_embed(const TokenSequence& sequence, PoolingMode mode);

// Precomputed embeddings keyed by record id (see io::read_embedding_file).
std::map<std::string, TextEmbedding> load_embeddings(const std::filesystem::path& path);

class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(std::map<std::string, TextEmbedding> table) : table_(std::move(table)) {}
  static FileEmbeddingProvider open(const std::filesystem::path& path) { return FileEmbeddingProvider(load_embeddings(path)); }

  TextEmbedding embed(std::string_view id, const TokenSequence& sequence, PoolingMode mode) const override;

 private:
  std::map<std::string, TextEmbedding> table_;
};

}  // namespace mmhs::text
