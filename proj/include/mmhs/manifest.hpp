#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmhs/emotion_mtl.hpp"

namespace mmhs::data {

enum class Split { Train, Val, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestRecord {
  std::string id;
  std::string audio_path;  // relative paths resolve against the manifest directory
  std::string transcript;
  int label = 0;           // 1 = HateSpeech
  std::optional<Split> split;
  std::optional<emotion::EmotionAttributes> attributes;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::filesystem::path audio_path(const ManifestRecord& record) const;
  std::vector<const ManifestRecord*> in_split(Split split) const;
  const ManifestRecord* find(std::string_view id) const;
};

inline constexpr std::array<const char*, 5> kRequiredColumns{"id", "audio_path", "transcript", "label", "split"};
inline constexpr std::array<const char*, 3> kAttributeColumns{"valence", "arousal", "dominance"};

// Errors: SchemaError for a missing column, ValidationError naming the line
// for a bad label/split/attribute, ValidationError naming a duplicate id.
Manifest parse_manifest(std::string_view text, const std::string& source = "<manifest>");
Manifest load_manifest(const std::filesystem::path& path);

std::string format_manifest(std::span<const ManifestRecord> records);
void save_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records);

// Labels CSV: id,valence,arousal,dominance with an optional split column.
// Without that column, splits come from split_dataset(seed).
Manifest parse_labels(std::string_view text, std::uint64_t seed, const std::string& source = "<labels>");
Manifest load_labels(const std::filesystem::path& path, std::uint64_t seed);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Seeded shuffle, then floor(n * ratio) rows for val and test; the rest go to
// train. Returned records keep their input order.
std::vector<ManifestRecord> split_dataset(std::vector<ManifestRecord> records, const SplitRatios& ratios,
                                          std::uint64_t seed);

}  // namespace mmhs::data
