#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmhs::metrics {

// Positive class is HateSpeech (label 1).
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> targets);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ClassScores positive;
  ClassScores negative;
};

// Macro values are means of the per-class values; a zero denominator yields 0.
MacroScores macro_scores(const ConfusionMatrix& cm);

double accuracy(const ConfusionMatrix& cm);

struct RunMetrics {
  std::string run_id;
  std::string model_kind;
  std::string split;
  std::optional<MacroScores> scores;
  std::optional<std::array<double, 3>> rmse;  // valence, arousal, dominance
};

struct Report {
  std::string table;
  std::vector<std::string> csv_rows;  // one per run, no header; fractions and RMSEs to 6 decimals
};

inline constexpr const char* kReportCsvHeader = "run_id,model_kind,split,precision,recall,f1,rmse_val,rmse_aro,rmse_dom";

// "93.00 / 92.89 / 92.94"
std::string format_percent_triple(double a, double b, double c);
// "0.1846 / 0.1124 / 0.1431"
std::string format_rmse_triple(const std::array<double, 3>& rmse);

Report render_report(std::span<const RunMetrics> runs);

}  // namespace mmhs::metrics
