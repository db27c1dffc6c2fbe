#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmhs/audio_features.hpp"
#include "mmhs/embedding_file.hpp"
#include "mmhs/emotion_mtl.hpp"
#include "mmhs/eval_metrics.hpp"
#include "mmhs/fusion_mml.hpp"
#include "mmhs/manifest.hpp"
#include "mmhs/signal_io.hpp"
#include "mmhs/text_pipeline.hpp"

// File-level steps behind each CLI command.
namespace mmhs::pipeline {

using Path = std::filesystem::path;

// Progress messages go here when set (the CLI points it at stderr for --verbose).
void set_log_stream(std::ostream* out);
void log(const std::string& message);

// Reads, resamples to 44.1 kHz when needed, and denoises one clip.
signal::AudioSignal load_audio(const Path& path, bool denoise, const signal::GateSettings& gate);
void denoise_file(const Path& in, const Path& out, const signal::GateSettings& gate,
                  const std::optional<Path>& noise_clip = std::nullopt);

struct FeatureOptions {
  features::RepresentationKind kind = features::RepresentationKind::F2;
  bool denoise = true;
  signal::GateSettings gate;
  bool write_clip_csv = true;
};

// Writes <out_dir>/features.mmfm (unscaled representations) and, optionally,
// <out_dir>/clips/<id>.csv (feature-name header plus one row of values).
io::VectorTable extract_features(const Path& manifest, const Path& out_dir, const FeatureOptions& options);
std::map<std::string, std::vector<double>> load_vectors(const io::VectorTable& table);

// A directory argument means <dir>/features.mmfm.
Path feature_file(const Path& features);

// `labels` supplies attributes and splits (a manifest or a labels CSV).
emotion::MtlTrainResult emotion_train(const data::Manifest& labels, const Path& features,
                                      const emotion::MtlConfig& config, const Path& out_ckpt,
                                      const std::optional<Path>& trace_csv = std::nullopt);
metrics::RunMetrics emotion_eval(const Path& ckpt, const data::Manifest& labels, const Path& features,
                                 data::Split split, const std::string& run_id);
// Embeds every record of the feature file.
void emotion_embed(const Path& ckpt, const Path& features, const Path& out_embeddings);
emotion::TuneResult emotion_tune(const data::Manifest& labels, const Path& features, const emotion::MtlConfig& base,
                                 const Path& out_csv);

struct TextEmbedOptions {
  text::PoolingMode pooling = text::PoolingMode::Cls;
  std::string provider = "stub";        // stub | file
  std::optional<Path> provider_file;    // required for provider "file"
  std::optional<Path> vocabulary;       // defaults to the built-in demo vocabulary
};
void text_embed(const Path& manifest, const Path& out_embeddings, const TextEmbedOptions& options);

fusion::FusionTrainResult fuse_train(const Path& text_embeddings, const Path& speech_embeddings, const Path& manifest,
                                     const fusion::FusionConfig& config, const Path& out_ckpt, bool zero_speech,
                                     const std::optional<Path>& trace_csv = std::nullopt);
metrics::RunMetrics fuse_eval(const Path& ckpt, const Path& text_embeddings, const Path& speech_embeddings,
                              const Path& manifest, data::Split split, bool zero_speech, const std::string& run_id,
                              const std::optional<Path>& predictions_csv = std::nullopt);

struct ClipPrediction {
  fusion::Prediction prediction;
  emotion::EmotionAttributes attributes;
};
ClipPrediction predict_clip(const Path& fusion_ckpt, const Path& emotion_ckpt, const Path& audio,
                            const std::string& transcript, const TextEmbedOptions& text_options,
                            const std::string& clip_id, bool denoise, const signal::GateSettings& gate);

// Header plus one row per run.
void write_metrics_csv(const Path& path, std::span<const metrics::RunMetrics> runs);
std::vector<metrics::RunMetrics> read_metrics_csv(const Path& path);

}  // namespace mmhs::pipeline
