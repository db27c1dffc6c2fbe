#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mmhs::io {

// Layout (little-endian): magic[4] | version u32 = 1 | record_count u32 | dim u32,
// then per record: id_length u16 | id bytes (UTF-8) | dim x float32.
// "MMEB" files hold embeddings (dim 510 or 768); "MMFM" files hold audio
// feature vectors (dim 136 or 1360) with the same layout.
inline constexpr std::array<char, 4> kEmbeddingMagic{'M', 'M', 'E', 'B'};
inline constexpr std::array<char, 4> kFeatureMagic{'M', 'M', 'F', 'M'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct VectorRecord {
  std::string id;
  std::vector<float> values;
};

struct VectorTable {
  std::uint32_t dim = 0;
  std::vector<VectorRecord> records;
};

std::vector<std::uint8_t> encode_vector_table(std::array<char, 4> magic, const VectorTable& table);
VectorTable decode_vector_table(std::span<const std::uint8_t> bytes, std::array<char, 4> magic,
                                std::span<const std::uint32_t> allowed_dims);

void write_embedding_file(const std::filesystem::path& path, const VectorTable& table);
VectorTable read_embedding_file(const std::filesystem::path& path);

void write_feature_file(const std::filesystem::path& path, const VectorTable& table);
VectorTable read_feature_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mmhs::io
