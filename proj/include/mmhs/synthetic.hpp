#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmhs/emotion_mtl.hpp"
#include "mmhs/manifest.hpp"
#include "mmhs/signal_io.hpp"

namespace mmhs::synth {

struct SyntheticSpec {
  int positives = 50;
  int negatives = 50;
  std::uint64_t seed = 42;
  double duration_s = 4.0;
  double lead_s = 0.5;  // noise-only lead-in, used as the denoiser's profile
  int sample_rate = 44100;
  double noise_std = 0.01;
};

// Synthesis parameters of one clip. Attributes are exact functions of these.
struct ClipParams {
  std::string id;
  double f0 = 0.0;          // Hz, in [120, 360]
  double am_depth = 0.0;    // in [0, 1]
  double am_rate = 0.0;     // Hz, 2 + 6 * am_depth
  double amplitude = 0.0;   // in [0.3, 0.9]
  std::string marker;       // empty when the transcript carries no marker
  int label = 0;
  std::uint64_t noise_seed = 0;
};

inline constexpr double kMinF0 = 120.0;
inline constexpr double kMaxF0 = 360.0;
inline constexpr double kMinAmplitude = 0.3;
inline constexpr double kMaxAmplitude = 0.9;

// valence = (f0 - 120) / 240, arousal = AM depth, dominance = (A - 0.3) / 0.6
emotion::EmotionAttributes attributes_of(const ClipParams& p);

const std::vector<std::string>& marker_words();

// Harmonic tone with vibrato and amplitude modulation after a noise-only lead.
signal::AudioSignal synthesize(const ClipParams& p, const SyntheticSpec& spec);

struct SyntheticDataset {
  std::vector<ClipParams> params;
  std::vector<data::ManifestRecord> records;  // splits assigned
};

// Label 1: marker present and AM depth in [0.6, 1]. Label 0: half carry a
// marker with depth in [0, 0.4], the rest carry none with depth in [0, 1].
SyntheticDataset plan_dataset(const SyntheticSpec& spec);

// Writes audio/<id>.wav (PCM16), manifest.csv and synth_params.csv.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace mmhs::synth
