#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmhs/signal_io.hpp"

namespace mmhs::features {

inline constexpr std::size_t kBaseFeatureCount = 34;
inline constexpr std::size_t kShortTermCount = 2 * kBaseFeatureCount;  // values + deltas
inline constexpr std::size_t kMidTermCount = 2 * kShortTermCount;      // means + stds
inline constexpr std::size_t kMfccCount = 13;
inline constexpr std::size_t kMelFilterCount = 40;
inline constexpr std::size_t kChromaCount = 12;
inline constexpr std::size_t kEntropyBlocks = 10;
inline constexpr std::size_t kF2Rows = 10;
inline constexpr std::size_t kF1Length = kMidTermCount;
inline constexpr std::size_t kF2Length = kF2Rows * kMidTermCount;

// Column indices of the 34 base short-term features. Delta of feature i sits
// at column i + kBaseFeatureCount.
enum Column : std::size_t {
  kZeroCrossingRate = 0,
  kEnergy = 1,
  kEnergyEntropy = 2,
  kSpectralCentroid = 3,
  kSpectralSpread = 4,
  kSpectralEntropy = 5,
  kSpectralFlux = 6,
  kSpectralRolloff = 7,
  kMfccFirst = 8,                       // 8..20
  kChromaFirst = kMfccFirst + kMfccCount,  // 21..32
  kChromaDeviation = kChromaFirst + kChromaCount,  // 33
};
static_assert(kChromaDeviation + 1 == kBaseFeatureCount);

struct FrameSpec {
  double window_ms = 50.0;
  double step_ms = 50.0;
};

// frames x 68; row t holds frame t.
struct ShortTermFeatureMatrix {
  Eigen::MatrixXd values;
  FrameSpec frame_spec;
  int sample_rate = 0;

  std::size_t frames() const { return static_cast<std::size_t>(values.rows()); }
};

// windows x 136; columns 0..67 are means, 68..135 population stds.
struct MidTermFeatureMatrix {
  Eigen::MatrixXd values;
  double mid_window_ms = 1000.0;
  double mid_step_ms = 1000.0;

  std::size_t windows() const { return static_cast<std::size_t>(values.rows()); }
};

enum class RepresentationKind { F1, F2 };

std::size_t representation_length(RepresentationKind kind);
std::string_view to_string(RepresentationKind kind);
RepresentationKind parse_representation_kind(std::string_view text);

struct FeatureRepresentation {
  RepresentationKind kind = RepresentationKind::F1;
  std::vector<double> values;
};

const std::vector<std::string>& short_term_feature_names();
std::vector<std::string> mid_term_feature_names();
std::vector<std::string> representation_feature_names(RepresentationKind kind);

// Frame count for `num_samples` samples: floor((n - window) / step) + 1.
std::size_t frame_count(std::size_t num_samples, std::size_t window, std::size_t step);

ShortTermFeatureMatrix short_term_features(const signal::AudioSignal& signal, const FrameSpec& spec = {});
MidTermFeatureMatrix mid_term_features(const ShortTermFeatureMatrix& st, double mid_window_ms = 1000.0,
                                       double mid_step_ms = 1000.0);
FeatureRepresentation make_f1(const MidTermFeatureMatrix& mt);
FeatureRepresentation make_f2(const MidTermFeatureMatrix& mt);

// Full chain for one clip: short-term -> mid-term -> f1/f2.
FeatureRepresentation extract_representation(const signal::AudioSignal& signal, RepresentationKind kind,
                                             const FrameSpec& spec = {}, double mid_window_ms = 1000.0,
                                             double mid_step_ms = 1000.0);

// Min-max scaling to [-1, 1]. Immutable after fit.
class FeatureScaler {
 public:
  FeatureScaler() = default;
  FeatureScaler(std::vector<double> min, std::vector<double> max);

  std::size_t size() const { return min_.size(); }
  const std::vector<double>& min() const { return min_; }
  const std::vector<double>& max() const { return max_; }
  bool is_degenerate(std::size_t i) const { return min_[i] == max_[i]; }

  std::vector<double> transform(std::span<const double> x) const;

 private:
  std::vector<double> min_;
  std::vector<double> max_;
};

FeatureScaler fit_scaler(std::span<const FeatureRepresentation> representations);
FeatureRepresentation apply_scaler(const FeatureScaler& scaler, const FeatureRepresentation& rep);

}  // namespace mmhs::features
