#include "mmhs/embedding_file.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <set>

#include "mmhs/errors.hpp"

namespace mmhs::io {
namespace {

constexpr std::array<std::uint32_t, 2> kEmbeddingDims{510, 768};
constexpr std::array<std::uint32_t, 2> kFeatureDims{136, 1360};

std::string magic_string(std::array<char, 4> magic) { return std::string(magic.begin(), magic.end()); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw CorruptionError(std::string("vector file truncated while reading ") + what, pos_);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_dim(std::uint32_t dim, std::span<const std::uint32_t> allowed) {
  if (std::find(allowed.begin(), allowed.end(), dim) != allowed.end()) return;
  std::string expected;
  for (auto d : allowed) expected += (expected.empty() ? "" : " or ") + std::to_string(d);
  throw DimensionError("vector dimension " + std::to_string(dim) + " not allowed (expected " + expected + ")");
}

}  // namespace

std::vector<std::uint8_t> encode_vector_table(std::array<char, 4> magic, const VectorTable& table) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), magic.begin(), magic.end());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(table.records.size()));
  put_u32(out, table.dim);
  for (const auto& rec : table.records) {
    if (rec.values.size() != table.dim)
      throw DimensionError("record '" + rec.id + "' has " + std::to_string(rec.values.size()) +
                           " values, table dimension is " + std::to_string(table.dim));
    if (rec.id.size() > 0xFFFF) throw ValidationError("record id longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(rec.id.size()));
    out.insert(out.end(), rec.id.begin(), rec.id.end());
    for (float v : rec.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

VectorTable decode_vector_table(std::span<const std::uint8_t> bytes, std::array<char, 4> magic,
                                std::span<const std::uint32_t> allowed_dims) {
  Cursor in(bytes);
  const auto head = in.take(4, "magic");
  if (!std::equal(head.begin(), head.end(), magic.begin()))
    throw FormatError("bad magic: expected " + magic_string(magic));
  const auto version = in.u32("version");
  if (version != kFormatVersion)
    throw FormatError("unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kFormatVersion) + ")");
  const auto count = in.u32("record count");
  VectorTable table;
  table.dim = in.u32("dimension");
  check_dim(table.dim, allowed_dims);

  std::set<std::string> seen;
  table.records.reserve(std::min<std::size_t>(count, bytes.size() / 8 + 1));
  for (std::uint32_t r = 0; r < count; ++r) {
    VectorRecord rec;
    const std::size_t id_len = in.u16("record id length");
    const auto id = in.take(id_len, "record id");
    rec.id.assign(id.begin(), id.end());
    if (!seen.insert(rec.id).second) throw FormatError("duplicate record id '" + rec.id + "'");
    const auto payload = in.take(static_cast<std::size_t>(table.dim) * 4, "record values");
    rec.values.resize(table.dim);
    for (std::size_t i = 0; i < table.dim; ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | payload[i * 4 + static_cast<std::size_t>(b)];
      rec.values[i] = std::bit_cast<float>(bits);
    }
    table.records.push_back(std::move(rec));
  }
  if (!in.at_end())
    throw CorruptionError("trailing bytes after " + std::to_string(count) + " declared records", in.offset());
  return table;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_embedding_file(const std::filesystem::path& path, const VectorTable& table) {
  check_dim(table.dim, kEmbeddingDims);
  write_file_atomic(path, encode_vector_table(kEmbeddingMagic, table));
}

VectorTable read_embedding_file(const std::filesystem::path& path) {
  return decode_vector_table(read_file_bytes(path), kEmbeddingMagic, kEmbeddingDims);
}

void write_feature_file(const std::filesystem::path& path, const VectorTable& table) {
  check_dim(table.dim, kFeatureDims);
  write_file_atomic(path, encode_vector_table(kFeatureMagic, table));
}

VectorTable read_feature_file(const std::filesystem::path& path) {
  return decode_vector_table(read_file_bytes(path), kFeatureMagic, kFeatureDims);
}

}  // namespace mmhs::io
