#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmhs/audio_features.hpp"
#include "mmhs/emotion_mtl.hpp"
#include "mmhs/fusion_mml.hpp"
#include "mmhs/signal_io.hpp"
#include "mmhs/text_pipeline.hpp"

namespace mmhs::config {

// Inferred values come from input files (e.g. feature_kind from a feature
// file) and rank between defaults and the config file.
enum class Source { Default, Inferred, File, Cli };
std::string_view to_string(Source source);

struct KeyInfo {
  std::string name;
  std::string help;
};

// Every recognised key. mtl.* defaults follow the chosen feature_kind.
const std::vector<KeyInfo>& known_keys();

// Flat key=value settings with precedence CLI > file > defaults.
class RunConfig {
 public:
  // Lines are "key = value"; '#' starts a comment. Unknown keys are rejected.
  void load_file(const std::filesystem::path& path);
  void parse_text(std::string_view text, const std::string& source);
  void set(std::string_view key, std::string value, Source source = Source::Cli);
  // Accepts "key=value".
  void set_assignment(std::string_view assignment, Source source = Source::Cli);

  std::string get(std::string_view key) const;
  Source source_of(std::string_view key) const;
  int get_int(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;

  std::uint64_t seed() const { return get_u64("seed"); }
  features::RepresentationKind feature_kind() const;
  text::PoolingMode pooling() const;
  std::string provider() const;

  emotion::MtlConfig mtl_config() const;
  fusion::FusionConfig fusion_config() const;
  signal::GateSettings gate_settings() const;

  // One "key = value  (source)" line per key, sorted by key.
  std::string describe() const;

 private:
  std::string default_value(std::string_view key) const;

  std::map<std::string, std::string, std::less<>> inferred_;
  std::map<std::string, std::string, std::less<>> file_;
  std::map<std::string, std::string, std::less<>> cli_;
};

}  // namespace mmhs::config
