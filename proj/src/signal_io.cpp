#include "mmhs/signal_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "mmhs/errors.hpp"
#include "mmhs/fft.hpp"

namespace mmhs::signal {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("WAV: truncated ") + what);
  }
  std::string tag() {
    require(4, "chunk tag");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }
  std::uint16_t u16() {
    require(2, "field");
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    require(4, "field");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  void skip(std::size_t n) {
    require(n, "chunk body");
    pos_ += n;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    require(n, "chunk body");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FormatChunk& fmt) {
  if (fmt.format == kFormatPcm) {
    auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
    return static_cast<double>(raw) / 32768.0;
  }
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  const double v = static_cast<double>(std::bit_cast<float>(bits));
  if (!std::isfinite(v)) return 0.0;
  return std::clamp(v, -1.0, 1.0);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

// Frames of `size` samples with hop size/2 over `samples`, Hann-windowed.
// Calls fn(frame_index, spectrum).
template <typename Fn>
void for_each_frame_spectrum(std::span<const double> samples, std::size_t size, Fn&& fn) {
  RealFft fft(size);
  const auto window = hann_window(size);
  const std::size_t hop = size / 2;
  std::vector<double> frame(size);
  std::vector<std::complex<double>> spectrum(fft.bins());
  std::size_t index = 0;
  for (std::size_t start = 0; start + size <= samples.size(); start += hop, ++index) {
    for (std::size_t i = 0; i < size; ++i) frame[i] = samples[start + i] * window[i];
    fft.forward(frame, spectrum);
    fn(index, spectrum);
  }
}

void validate_fft_size(std::size_t fft_size) {
  if (fft_size < 4 || fft_size % 2 != 0)
    throw ValidationError("fft_size must be an even number >= 4, got " + std::to_string(fft_size));
}

}  // namespace

std::vector<double> hann_window(std::size_t size) {
  std::vector<double> w(size);
  for (std::size_t i = 0; i < size; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(size));
  return w;
}

AudioSignal decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (bytes.size() < 12) throw FormatError("WAV: file shorter than RIFF header");
  if (in.tag() != "RIFF") throw FormatError("WAV: missing RIFF tag");
  in.u32();
  if (in.tag() != "WAVE") throw FormatError("WAV: missing WAVE tag");

  FormatChunk fmt;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  while (in.remaining() >= 8 && !have_data) {
    const std::string id = in.tag();
    const std::uint32_t size = in.u32();
    if (id == "fmt ") {
      if (size < 16) throw FormatError("WAV: fmt chunk too small");
      auto body = in.take(size);
      ByteReader f(body);
      fmt.format = f.u16();
      fmt.channels = f.u16();
      fmt.sample_rate = f.u32();
      f.u32();  // byte rate
      f.u16();  // block align
      fmt.bits = f.u16();
      if (fmt.format == kFormatExtensible) {
        if (size < 40) throw FormatError("WAV: extensible fmt chunk too small");
        f.u16();  // cbSize
        f.u16();  // valid bits
        f.u32();  // channel mask
        fmt.format = f.u16();
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("WAV: data chunk precedes fmt chunk");
      if (size > in.remaining()) throw FormatError("WAV: data chunk extends past end of file");
      data = in.take(size);
      have_data = true;
    } else {
      in.skip(std::min<std::size_t>(size + (size & 1u), in.remaining()));
    }
  }
  if (!have_fmt) throw FormatError("WAV: missing fmt chunk");
  if (!have_data) throw FormatError("WAV: missing data chunk");

  if (fmt.format == kFormatPcm) {
    if (fmt.bits != 16)
      throw UnsupportedCodecError("WAV: unsupported PCM bit depth " + std::to_string(fmt.bits));
  } else if (fmt.format == kFormatFloat) {
    if (fmt.bits != 32)
      throw UnsupportedCodecError("WAV: unsupported float bit depth " + std::to_string(fmt.bits));
  } else {
    throw UnsupportedCodecError("WAV: unsupported codec tag " + std::to_string(fmt.format));
  }
  if (fmt.channels != 1 && fmt.channels != 2)
    throw UnsupportedCodecError("WAV: unsupported channel count " + std::to_string(fmt.channels));
  if (fmt.sample_rate == 0) throw FormatError("WAV: sample rate is zero");

  const std::size_t bytes_per_sample = fmt.bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  const std::size_t frames = data.size() / frame_bytes;

  AudioSignal out;
  out.sample_rate = static_cast<int>(fmt.sample_rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* p = data.data() + i * frame_bytes;
    if (fmt.channels == 1) {
      out.samples[i] = decode_sample(p, fmt);
    } else {
      out.samples[i] = 0.5 * (decode_sample(p, fmt) + decode_sample(p + bytes_per_sample, fmt));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_wav(const AudioSignal& signal, WavEncoding encoding) {
  if (signal.sample_rate <= 0) throw ValidationError("encode_wav: sample rate must be positive");
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(signal.samples.size() * (bits / 8));
  const auto rate = static_cast<std::uint32_t>(signal.sample_rate);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : signal.samples) {
    if (encoding == WavEncoding::Pcm16) {
      const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  return out;
}

AudioSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  AudioSignal s = decode_wav(bytes);
  s.id = path.stem().string();
  return s;
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal, WavEncoding encoding) {
  const auto bytes = encode_wav(signal, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

AudioSignal resample(const AudioSignal& signal, int target_rate) {
  if (target_rate <= 0) throw ValidationError("resample: target rate must be positive");
  if (signal.sample_rate <= 0) throw ValidationError("resample: source rate must be positive");
  if (target_rate == signal.sample_rate) return signal;

  AudioSignal out;
  out.id = signal.id;
  out.sample_rate = target_rate;
  const std::size_t n = signal.samples.size();
  if (n == 0) return out;

  const double ratio = static_cast<double>(signal.sample_rate) / target_rate;
  const auto length = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * target_rate / signal.sample_rate));
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto left = std::min(static_cast<std::size_t>(pos), n - 1);
    const std::size_t right = std::min(left + 1, n - 1);
    const double frac = std::clamp(pos - static_cast<double>(left), 0.0, 1.0);
    const double a = signal.samples[left];
    const double b = signal.samples[right];
    out.samples[i] = a + (b - a) * frac;
  }
  return out;
}

NoiseProfile estimate_noise_profile(const AudioSignal& noise_clip, std::size_t fft_size,
                                    double sensitivity) {
  validate_fft_size(fft_size);
  if (sensitivity < 0.0) throw ValidationError("noise profile sensitivity must be >= 0");
  if (noise_clip.samples.size() < fft_size)
    throw TooShortError("noise clip has " + std::to_string(noise_clip.samples.size()) +
                        " samples, fewer than one FFT frame of " + std::to_string(fft_size));

  NoiseProfile profile;
  profile.fft_size = fft_size;
  profile.thresholds.assign(fft_size / 2 + 1, 0.0);
  std::size_t frames = 0;
  for_each_frame_spectrum(noise_clip.samples, fft_size,
                          [&](std::size_t, std::span<const std::complex<double>> spectrum) {
                            for (std::size_t k = 0; k < spectrum.size(); ++k)
                              profile.thresholds[k] += std::abs(spectrum[k]);
                            ++frames;
                          });
  for (double& t : profile.thresholds) t = t / static_cast<double>(frames) * sensitivity;
  return profile;
}

AudioSignal spectral_gate(const AudioSignal& signal, const NoiseProfile& noise, double reduction_db) {
  const std::size_t size = noise.fft_size;
  validate_fft_size(size);
  if (noise.thresholds.size() != size / 2 + 1)
    throw DimensionError("noise profile has " + std::to_string(noise.thresholds.size()) +
                         " bins, expected " + std::to_string(size / 2 + 1));
  if (reduction_db < 0.0) throw ValidationError("reduction_db must be >= 0");
  const std::size_t n = signal.samples.size();
  if (n < size)
    throw TooShortError("signal has " + std::to_string(n) + " samples, fewer than one FFT frame of " +
                        std::to_string(size));

  const std::size_t hop = size / 2;
  const std::size_t frames = (n + hop - 1) / hop + 1;
  const std::size_t padded_length = frames * hop + hop;
  std::vector<double> padded(padded_length, 0.0);
  std::copy(signal.samples.begin(), signal.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(hop));
  std::vector<double> output(padded_length, 0.0);

  const double gain = std::pow(10.0, -reduction_db / 20.0);
  const auto window = hann_window(size);
  RealFft fft(size);
  std::vector<double> frame(size);
  std::vector<std::complex<double>> spectrum(fft.bins());
  const double scale = 1.0 / static_cast<double>(size);

  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < size; ++i) frame[i] = padded[start + i] * window[i];
    fft.forward(frame, spectrum);
    for (std::size_t k = 0; k < spectrum.size(); ++k)
      if (std::abs(spectrum[k]) < noise.thresholds[k]) spectrum[k] *= gain;
    fft.inverse(spectrum, frame);
    for (std::size_t i = 0; i < size; ++i) output[start + i] += frame[i] * scale;
  }

  AudioSignal out;
  out.id = signal.id;
  out.sample_rate = signal.sample_rate;
  out.samples.assign(output.begin() + static_cast<std::ptrdiff_t>(hop),
                     output.begin() + static_cast<std::ptrdiff_t>(hop + n));
  for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  return out;
}

AudioSignal denoise(const AudioSignal& signal, const GateSettings& settings) {
  const auto lead = static_cast<std::size_t>(std::llround(settings.profile_ms / 1000.0 * signal.sample_rate));
  AudioSignal noise;
  noise.sample_rate = signal.sample_rate;
  const std::size_t take = std::max(std::min(lead, signal.samples.size()), settings.fft_size);
  noise.samples.assign(signal.samples.begin(),
                       signal.samples.begin() + static_cast<std::ptrdiff_t>(std::min(take, signal.samples.size())));
  return denoise(signal, noise, settings);
}

AudioSignal denoise(const AudioSignal& signal, const AudioSignal& noise_clip, const GateSettings& settings) {
  const auto profile = estimate_noise_profile(noise_clip, settings.fft_size, settings.sensitivity);
  return spectral_gate(signal, profile, settings.reduction_db);
}

}  // namespace mmhs::signal
