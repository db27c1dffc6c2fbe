#include "mmhs/audio_features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "mmhs/errors.hpp"
#include "mmhs/fft.hpp"

namespace mmhs::features {
namespace {

constexpr double kEps = 1e-8;
constexpr double kRolloffFraction = 0.90;
constexpr double kChromaReferenceHz = 27.5;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double block_entropy(std::span<const double> energies, std::size_t blocks) {
  const std::size_t block_len = energies.size() / blocks;
  if (block_len == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < blocks * block_len; ++i) total += energies[i];
  double entropy = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    double e = 0.0;
    for (std::size_t i = 0; i < block_len; ++i) e += energies[b * block_len + i];
    const double p = e / (total + kEps);
    entropy -= p * std::log2(p + kEps);
  }
  return entropy;
}

// Per-frame analysis state shared across frames of one clip.
class FrameAnalyzer {
 public:
  FrameAnalyzer(std::size_t window, int sample_rate)
      : window_(window), sample_rate_(sample_rate), fft_(window), spectrum_(fft_.bins()),
        magnitude_(fft_.bins()), previous_(fft_.bins(), 0.0), hamming_(window), buffer_(window),
        squares_(window) {
    const double span = window > 1 ? static_cast<double>(window - 1) : 1.0;
    for (std::size_t i = 0; i < window; ++i)
      hamming_[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / span);
    build_mel_filters();
    build_chroma_map();
  }

  void analyze(std::span<const double> frame, bool first, std::span<double> out) {
    const double n = static_cast<double>(window_);

    double crossings = 0.0;
    for (std::size_t i = 1; i < window_; ++i)
      crossings += std::abs(sign(frame[i]) - sign(frame[i - 1]));
    out[kZeroCrossingRate] = window_ > 1 ? crossings / 2.0 / (n - 1.0) : 0.0;

    double energy = 0.0;
    for (std::size_t i = 0; i < window_; ++i) {
      squares_[i] = frame[i] * frame[i];
      energy += squares_[i];
    }
    out[kEnergy] = energy / n;
    out[kEnergyEntropy] = block_entropy(squares_, kEntropyBlocks);

    for (std::size_t i = 0; i < window_; ++i) buffer_[i] = frame[i] * hamming_[i];
    fft_.forward(buffer_, spectrum_);
    const std::size_t bins = magnitude_.size();
    for (std::size_t k = 0; k < bins; ++k) magnitude_[k] = std::abs(spectrum_[k]) / n;

    const double nyquist = sample_rate_ / 2.0;
    const double peak = *std::max_element(magnitude_.begin(), magnitude_.end());
    double weighted = 0.0;
    double mass = 0.0;
    if (peak > 0.0) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double w = magnitude_[k] / peak;
        weighted += frequency(k) * w;
        mass += w;
      }
    }
    const double centroid = mass > 0.0 ? weighted / (mass + kEps) : 0.0;
    double spread_acc = 0.0;
    if (peak > 0.0) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double d = frequency(k) - centroid;
        spread_acc += d * d * magnitude_[k] / peak;
      }
    }
    out[kSpectralCentroid] = centroid / nyquist;
    out[kSpectralSpread] = mass > 0.0 ? std::sqrt(spread_acc / (mass + kEps)) / nyquist : 0.0;

    std::vector<double>& power = power_;
    power.resize(bins);
    double total_power = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      power[k] = magnitude_[k] * magnitude_[k];
      total_power += power[k];
    }
    out[kSpectralEntropy] = block_entropy(power, kEntropyBlocks);

    const double sum = std::accumulate(magnitude_.begin(), magnitude_.end(), 0.0) + kEps;
    double flux = 0.0;
    if (!first) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double d = magnitude_[k] / sum - previous_[k];
        flux += d * d;
      }
    }
    for (std::size_t k = 0; k < bins; ++k) previous_[k] = magnitude_[k] / sum;
    out[kSpectralFlux] = flux;

    double rolloff = 0.0;
    if (total_power > 0.0) {
      double cumulative = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        cumulative += power[k];
        if (cumulative > kRolloffFraction * total_power) {
          rolloff = frequency(k) / nyquist;
          break;
        }
      }
    }
    out[kSpectralRolloff] = rolloff;

    std::array<double, kMelFilterCount> log_mel{};
    for (std::size_t m = 0; m < kMelFilterCount; ++m) {
      double e = 0.0;
      for (const auto& [k, w] : mel_filters_[m]) e += w * magnitude_[k];
      log_mel[m] = std::log10(e + kEps);
    }
    const double M = static_cast<double>(kMelFilterCount);
    for (std::size_t c = 0; c < kMfccCount; ++c) {
      double acc = 0.0;
      for (std::size_t m = 0; m < kMelFilterCount; ++m)
        acc += log_mel[m] * std::cos(std::numbers::pi * static_cast<double>(c) * (static_cast<double>(m) + 0.5) / M);
      out[kMfccFirst + c] = acc * (c == 0 ? std::sqrt(1.0 / M) : std::sqrt(2.0 / M));
    }

    std::array<double, kChromaCount> chroma{};
    double chroma_total = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      if (chroma_class_[k] < 0) continue;
      chroma[static_cast<std::size_t>(chroma_class_[k])] += power[k];
      chroma_total += power[k];
    }
    double chroma_mean = 0.0;
    for (std::size_t c = 0; c < kChromaCount; ++c) {
      chroma[c] = chroma_total > 0.0 ? chroma[c] / (chroma_total + kEps) : 0.0;
      out[kChromaFirst + c] = chroma[c];
      chroma_mean += chroma[c];
    }
    chroma_mean /= static_cast<double>(kChromaCount);
    double chroma_var = 0.0;
    for (double v : chroma) chroma_var += (v - chroma_mean) * (v - chroma_mean);
    out[kChromaDeviation] = std::sqrt(chroma_var / static_cast<double>(kChromaCount));
  }

 private:
  static double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

  double frequency(std::size_t k) const {
    return static_cast<double>(k) * sample_rate_ / static_cast<double>(window_);
  }

  void build_mel_filters() {
    const double low = hz_to_mel(0.0);
    const double high = hz_to_mel(sample_rate_ / 2.0);
    std::array<double, kMelFilterCount + 2> edges{};
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(low + (high - low) * static_cast<double>(i) / static_cast<double>(kMelFilterCount + 1));
    mel_filters_.resize(kMelFilterCount);
    for (std::size_t m = 0; m < kMelFilterCount; ++m) {
      const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
      for (std::size_t k = 0; k < magnitude_.size(); ++k) {
        const double f = frequency(k);
        double w = 0.0;
        if (f > left && f <= centre) w = (f - left) / (centre - left);
        else if (f > centre && f < right) w = (right - f) / (right - centre);
        if (w > 0.0) mel_filters_[m].emplace_back(k, w);
      }
    }
  }

  void build_chroma_map() {
    chroma_class_.assign(magnitude_.size(), -1);
    for (std::size_t k = 1; k < magnitude_.size(); ++k) {
      const double f = frequency(k);
      if (f < kChromaReferenceHz) continue;
      const long semitone = std::lround(12.0 * std::log2(f / kChromaReferenceHz));
      chroma_class_[k] = static_cast<int>(((semitone % 12) + 12) % 12);
    }
  }

  std::size_t window_;
  int sample_rate_;
  RealFft fft_;
  std::vector<std::complex<double>> spectrum_;
  std::vector<double> magnitude_;
  std::vector<double> previous_;
  std::vector<double> hamming_;
  std::vector<double> buffer_;
  std::vector<double> squares_;
  std::vector<double> power_;
  std::vector<std::vector<std::pair<std::size_t, double>>> mel_filters_;
  std::vector<int> chroma_class_;
};

std::size_t ms_to_samples(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::llround(ms / 1000.0 * sample_rate));
}

}  // namespace

std::size_t representation_length(RepresentationKind kind) {
  return kind == RepresentationKind::F1 ? kF1Length : kF2Length;
}

std::string_view to_string(RepresentationKind kind) { return kind == RepresentationKind::F1 ? "f1" : "f2"; }

RepresentationKind parse_representation_kind(std::string_view text) {
  if (text == "f1") return RepresentationKind::F1;
  if (text == "f2") return RepresentationKind::F2;
  throw ValidationError("unknown feature kind '" + std::string(text) + "' (expected f1 or f2)");
}

const std::vector<std::string>& short_term_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> base = {"zcr",           "energy",          "energy_entropy",
                                     "spectral_centroid", "spectral_spread", "spectral_entropy",
                                     "spectral_flux", "spectral_rolloff"};
    for (std::size_t i = 1; i <= kMfccCount; ++i) base.push_back("mfcc_" + std::to_string(i));
    for (std::size_t i = 1; i <= kChromaCount; ++i) base.push_back("chroma_" + std::to_string(i));
    base.push_back("chroma_std");
    std::vector<std::string> all = base;
    for (const auto& n : base) all.push_back("delta_" + n);
    return all;
  }();
  return names;
}

std::vector<std::string> mid_term_feature_names() {
  std::vector<std::string> names;
  names.reserve(kMidTermCount);
  for (const auto& n : short_term_feature_names()) names.push_back(n + "_mean");
  for (const auto& n : short_term_feature_names()) names.push_back(n + "_std");
  return names;
}

std::vector<std::string> representation_feature_names(RepresentationKind kind) {
  const auto mid = mid_term_feature_names();
  if (kind == RepresentationKind::F1) return mid;
  std::vector<std::string> names;
  names.reserve(kF2Length);
  for (std::size_t r = 0; r < kF2Rows; ++r)
    for (const auto& n : mid) names.push_back("w" + std::to_string(r) + "_" + n);
  return names;
}

std::size_t frame_count(std::size_t num_samples, std::size_t window, std::size_t step) {
  if (window == 0 || step == 0 || num_samples < window) return 0;
  return (num_samples - window) / step + 1;
}

ShortTermFeatureMatrix short_term_features(const signal::AudioSignal& signal, const FrameSpec& spec) {
  if (!(spec.window_ms > 0.0) || !(spec.step_ms > 0.0))
    throw ValidationError("frame window and step must be positive");
  if (signal.sample_rate <= 0) throw ValidationError("signal sample rate must be positive");
  const std::size_t window = ms_to_samples(spec.window_ms, signal.sample_rate);
  const std::size_t step = ms_to_samples(spec.step_ms, signal.sample_rate);
  if (window < 2 || step == 0) throw ValidationError("frame window/step shorter than two samples");
  const std::size_t frames = frame_count(signal.samples.size(), window, step);
  if (frames == 0)
    throw TooShortError("signal of " + std::to_string(signal.samples.size()) +
                        " samples is shorter than one analysis window of " + std::to_string(window));

  ShortTermFeatureMatrix st;
  st.frame_spec = spec;
  st.sample_rate = signal.sample_rate;
  st.values.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(kShortTermCount));

  FrameAnalyzer analyzer(window, signal.sample_rate);
  std::array<double, kBaseFeatureCount> current{};
  std::array<double, kBaseFeatureCount> previous{};
  const std::span<const double> samples(signal.samples);
  for (std::size_t t = 0; t < frames; ++t) {
    analyzer.analyze(samples.subspan(t * step, window), t == 0, current);
    if (t == 0) previous = current;
    const auto row = static_cast<Eigen::Index>(t);
    for (std::size_t i = 0; i < kBaseFeatureCount; ++i) {
      st.values(row, static_cast<Eigen::Index>(i)) = current[i];
      st.values(row, static_cast<Eigen::Index>(i + kBaseFeatureCount)) = current[i] - previous[i];
    }
    previous = current;
  }
  return st;
}

MidTermFeatureMatrix mid_term_features(const ShortTermFeatureMatrix& st, double mid_window_ms, double mid_step_ms) {
  if (st.frames() == 0) throw ValidationError("mid_term_features: empty short-term matrix");
  if (static_cast<std::size_t>(st.values.cols()) != kShortTermCount)
    throw DimensionError("mid_term_features: expected " + std::to_string(kShortTermCount) + " columns");
  if (!(mid_window_ms > 0.0) || !(mid_step_ms > 0.0))
    throw ValidationError("mid-term window and step must be positive");
  const auto window_frames =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mid_window_ms / st.frame_spec.step_ms)));
  const auto step_frames =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mid_step_ms / st.frame_spec.step_ms)));
  const std::size_t n = st.frames();
  const std::size_t windows = (n + step_frames - 1) / step_frames;

  MidTermFeatureMatrix mt;
  mt.mid_window_ms = mid_window_ms;
  mt.mid_step_ms = mid_step_ms;
  mt.values.resize(static_cast<Eigen::Index>(windows), static_cast<Eigen::Index>(kMidTermCount));
  const auto cols = static_cast<Eigen::Index>(kShortTermCount);
  for (std::size_t w = 0; w < windows; ++w) {
    const auto begin = static_cast<Eigen::Index>(w * step_frames);
    const auto count = static_cast<Eigen::Index>(std::min(window_frames, n - w * step_frames));
    const auto block = st.values.middleRows(begin, count);
    const Eigen::RowVectorXd mean = block.colwise().mean();
    const Eigen::RowVectorXd var = (block.rowwise() - mean).array().square().colwise().mean();
    const auto row = static_cast<Eigen::Index>(w);
    mt.values.row(row).head(cols) = mean;
    mt.values.row(row).tail(cols) = var.array().sqrt();
  }
  return mt;
}

FeatureRepresentation make_f1(const MidTermFeatureMatrix& mt) {
  if (mt.windows() == 0) throw ValidationError("make_f1: empty mid-term matrix");
  const Eigen::RowVectorXd mean = mt.values.colwise().mean();
  FeatureRepresentation rep;
  rep.kind = RepresentationKind::F1;
  rep.values.assign(mean.data(), mean.data() + mean.size());
  return rep;
}

FeatureRepresentation make_f2(const MidTermFeatureMatrix& mt) {
  if (mt.windows() == 0) throw ValidationError("make_f2: empty mid-term matrix");
  FeatureRepresentation rep;
  rep.kind = RepresentationKind::F2;
  rep.values.assign(kF2Length, 0.0);
  const std::size_t rows = std::min(kF2Rows, mt.windows());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < kMidTermCount; ++c)
      rep.values[r * kMidTermCount + c] = mt.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return rep;
}

FeatureRepresentation extract_representation(const signal::AudioSignal& signal, RepresentationKind kind,
                                             const FrameSpec& spec, double mid_window_ms, double mid_step_ms) {
  const auto mt = mid_term_features(short_term_features(signal, spec), mid_window_ms, mid_step_ms);
  return kind == RepresentationKind::F1 ? make_f1(mt) : make_f2(mt);
}

FeatureScaler::FeatureScaler(std::vector<double> min, std::vector<double> max)
    : min_(std::move(min)), max_(std::move(max)) {
  if (min_.size() != max_.size()) throw DimensionError("scaler min/max length mismatch");
  for (std::size_t i = 0; i < min_.size(); ++i)
    if (!(min_[i] <= max_[i])) throw ValidationError("scaler min exceeds max at dimension " + std::to_string(i));
}

std::vector<double> FeatureScaler::transform(std::span<const double> x) const {
  if (x.size() != min_.size())
    throw DimensionError("scaler expects length " + std::to_string(min_.size()) + ", got " +
                         std::to_string(x.size()));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_degenerate(i)) {
      out[i] = 0.0;
      continue;
    }
    const double v = 2.0 * (x[i] - min_[i]) / (max_[i] - min_[i]) - 1.0;
    out[i] = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

FeatureScaler fit_scaler(std::span<const FeatureRepresentation> representations) {
  if (representations.empty()) throw ValidationError("fit_scaler: empty collection");
  const auto kind = representations.front().kind;
  const std::size_t dim = representations.front().values.size();
  std::vector<double> lo(representations.front().values);
  std::vector<double> hi(representations.front().values);
  for (const auto& rep : representations) {
    if (rep.kind != kind) throw ValidationError("fit_scaler: mixed representation kinds");
    if (rep.values.size() != dim) throw DimensionError("fit_scaler: inconsistent vector lengths");
    for (std::size_t i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], rep.values[i]);
      hi[i] = std::max(hi[i], rep.values[i]);
    }
  }
  return FeatureScaler(std::move(lo), std::move(hi));
}

FeatureRepresentation apply_scaler(const FeatureScaler& scaler, const FeatureRepresentation& rep) {
  return FeatureRepresentation{rep.kind, scaler.transform(rep.values)};
}

}  // namespace mmhs::features
