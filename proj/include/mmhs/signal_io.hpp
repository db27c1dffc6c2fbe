#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mmhs::signal {

// Mono PCM audio with samples normalized to [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string id;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WavEncoding { Pcm16, Float32 };

// Decodes a RIFF/WAVE blob (PCM16 or float32, mono or stereo). Stereo is
// averaged to mono. Throws FormatError / UnsupportedCodecError.
AudioSignal decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const AudioSignal& signal, WavEncoding encoding);

AudioSignal read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioSignal& signal,
               WavEncoding encoding = WavEncoding::Float32);

// Linear-interpolation resampling; output length is round(n * target / source).
AudioSignal resample(const AudioSignal& signal, int target_rate);

// Per-bin magnitude thresholds for the spectral gate.
struct NoiseProfile {
  std::vector<double> thresholds;
  std::size_t fft_size = 0;
};

struct GateSettings {
  std::size_t fft_size = 2048;
  double sensitivity = 1.5;
  double reduction_db = 12.0;
  double profile_ms = 500.0;  // leading noise segment used when no noise clip is given
};

// Mean Hann-windowed STFT magnitude (50% overlap) times `sensitivity`.
NoiseProfile estimate_noise_profile(const AudioSignal& noise_clip, std::size_t fft_size,
                                    double sensitivity = 1.5);

// STFT magnitude gate: bins below the profile threshold are attenuated by
// reduction_db, then resynthesized by overlap-add. Output length equals input.
AudioSignal spectral_gate(const AudioSignal& signal, const NoiseProfile& noise,
                          double reduction_db);

// Profile from the first settings.profile_ms of the recording itself (or the
// whole recording if it is shorter than that but at least one frame).
AudioSignal denoise(const AudioSignal& signal, const GateSettings& settings);
AudioSignal denoise(const AudioSignal& signal, const AudioSignal& noise_clip,
                    const GateSettings& settings);

// Periodic Hann window; sums to one at 50% overlap.
std::vector<double> hann_window(std::size_t size);

}  // namespace mmhs::signal
