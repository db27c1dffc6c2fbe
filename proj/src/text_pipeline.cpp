#include "mmhs/text_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <regex>

#include "mmhs/embedding_file.hpp"
#include "mmhs/errors.hpp"

namespace mmhs::text {
namespace detail {
extern const std::string_view kDemoVocabulary;
}  // namespace detail

namespace {

constexpr std::uint64_t kTokenSalt = 0x6A09E667F3BCC908ULL;
constexpr std::uint64_t kSequenceSalt = 0xBB67AE8584CAA73BULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<double> unit_vector(std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(kEmbeddingDim);
  double norm = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string preprocess_text(std::string_view raw) {
  static const std::regex handle(R"(@\w+)");
  static const std::regex url(R"((https?://|www\.)\S*)", std::regex::icase);
  std::string s(raw);
  s = std::regex_replace(s, handle, " ");
  s = std::regex_replace(s, url, " ");

  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(ch)) {
      pending_space = !out.empty();
      continue;
    }
    const bool keep = (c < 0x80 && std::isalnum(c)) || ch == '!' || ch == '?';
    if (!keep) continue;
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

Vocabulary Vocabulary::from_lines(std::vector<std::string> tokens) {
  if (tokens.size() < 3 || tokens[kPadId] != "[PAD]" || tokens[kClsId] != "[CLS]" || tokens[kUnkId] != "[UNK]")
    throw FormatError("vocabulary must start with [PAD], [CLS], [UNK] on lines 0-2");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i)
    v.ids_.try_emplace(v.tokens_[i], static_cast<std::int32_t>(i));
  return v;
}

Vocabulary Vocabulary::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return from_lines(std::move(lines));
}

const Vocabulary& Vocabulary::demo() {
  static const Vocabulary vocab = [] {
    std::vector<std::string> lines;
    std::string_view text = detail::kDemoVocabulary;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      const auto line = text.substr(0, nl);
      if (!line.empty()) lines.emplace_back(line);
      if (nl == std::string_view::npos) break;
      text.remove_prefix(nl + 1);
    }
    return from_lines(std::move(lines));
  }();
  return vocab;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> basic_split(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    if (is_ascii_space(ch)) {
      flush();
    } else if (ch == '!' || ch == '?') {
      flush();
      words.emplace_back(1, ch);
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return words;
}

std::vector<std::int32_t> wordpiece(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::int32_t> ids;
  for (const auto& word : basic_split(text)) {
    if (word.size() > kMaxCharsPerWord) {
      ids.push_back(kUnkId);
      continue;
    }
    std::vector<std::int32_t> pieces;
    std::size_t start = 0;
    bool bad = false;
    while (start < word.size()) {
      std::size_t end = word.size();
      std::optional<std::int32_t> match;
      while (start < end) {
        std::string piece = word.substr(start, end - start);
        if (start > 0) piece.insert(0, "##");
        match = vocab.find(piece);
        if (match) break;
        --end;
      }
      if (!match) {
        bad = true;
        break;
      }
      pieces.push_back(*match);
      start = end;
    }
    if (bad) {
      ids.push_back(kUnkId);
    } else {
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    }
  }
  return ids;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.tokens.fill(kPadId);
  seq.tokens[0] = kClsId;
  const auto ids = wordpiece(text, vocab);
  const std::size_t n = std::min(ids.size(), kSequenceLength - 1);
  std::copy_n(ids.begin(), n, seq.tokens.begin() + 1);
  seq.attention_length = n + 1;
  seq.has_cls = true;
  return seq;
}

std::string_view to_string(PoolingMode mode) { return mode == PoolingMode::Cls ? "cls" : "mean"; }

PoolingMode parse_pooling_mode(std::string_view text) {
  if (text == "cls") return PoolingMode::Cls;
  if (text == "mean") return PoolingMode::MeanPool;
  throw ValidationError("unknown pooling mode '" + std::string(text) + "' (expected cls or mean)");
}

std::vector<double> StubEmbeddingProvider::token_vector(std::int32_t token_id) {
  return unit_vector(static_cast<std::uint64_t>(static_cast<std::uint32_t>(token_id)) ^ kTokenSalt);
}

std::uint64_t StubEmbeddingProvider::sequence_hash(std::span<const std::int32_t> ids) {
  // FNV-1a over the little-endian bytes of each id.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::int32_t id : ids) {
    const auto u = static_cast<std::uint32_t>(id);
    for (int b = 0; b < 4; ++b) {
      h ^= (u >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

TextEmbedding StubEmbeddingProvider::embed(std::string_view, const TokenSequence& sequence, PoolingMode mode) const {
  if (sequence.attention_length < 1 || sequence.attention_length > kSequenceLength)
    throw ValidationError("token sequence attention length out of range");
  TextEmbedding e;
  e.mode = mode;
  e.provider_tag = "stub";
  const auto active = sequence.active();
  if (mode == PoolingMode::Cls) {
    e.values = unit_vector(sequence_hash(active) ^ kSequenceSalt);
    return e;
  }
  // Summed in sorted id order so the mean is exactly permutation invariant.
  std::vector<std::int32_t> ids(active.begin(), active.end());
  std::sort(ids.begin(), ids.end());
  e.values.assign(kEmbeddingDim, 0.0);
  for (std::int32_t id : ids) {
    const auto v = token_vector(id);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) e.values[i] += v[i];
  }
  const double n = static_cast<double>(ids.size());
  for (double& x : e.values) x /= n;
  return e;
}

TextEmbedding stub_embed(const TokenSequence& sequence, PoolingMode mode) {
  return StubEmbeddingProvider{}.embed({}, sequence, mode);
}

std::map<std::string, TextEmbedding> load_embeddings(const std::filesystem::path& path) {
  const auto table = io::read_embedding_file(path);
  if (table.dim != kEmbeddingDim)
    throw DimensionError("text embedding file " + path.string() + " has dimension " + std::to_string(table.dim) +
                         ", expected " + std::to_string(kEmbeddingDim));
  std::map<std::string, TextEmbedding> out;
  for (const auto& rec : table.records) {
    TextEmbedding e;
    e.values.assign(rec.values.begin(), rec.values.end());
    e.provider_tag = "file";
    out.emplace(rec.id, std::move(e));
  }
  return out;
}

TextEmbedding FileEmbeddingProvider::embed(std::string_view id, const TokenSequence&, PoolingMode mode) const {
  const auto it = table_.find(std::string(id));
  if (it == table_.end()) throw ValidationError("no text embedding for id '" + std::string(id) + "'");
  TextEmbedding e = it->second;
  e.mode = mode;
  return e;
}

}  // namespace mmhs::text
