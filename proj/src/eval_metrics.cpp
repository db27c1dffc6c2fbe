#include "mmhs/eval_metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mmhs/errors.hpp"

namespace mmhs::metrics {
namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ClassScores class_scores(std::int64_t hit, std::int64_t false_alarm, std::int64_t miss) {
  ClassScores s;
  s.precision = ratio(hit, hit + false_alarm);
  s.recall = ratio(hit, hit + miss);
  const double denom = s.precision + s.recall;
  s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> targets) {
  if (predictions.size() != targets.size())
    throw DimensionError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(targets.size()) + " targets");
  if (predictions.empty()) throw ValidationError("confusion: no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int t = targets[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1)) throw ValidationError("confusion: labels must be 0 or 1");
    if (p == 1 && t == 1) ++cm.tp;
    else if (p == 1) ++cm.fp;
    else if (t == 1) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

MacroScores macro_scores(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw ValidationError("macro_scores: empty confusion matrix");
  MacroScores m;
  m.positive = class_scores(cm.tp, cm.fp, cm.fn);
  m.negative = class_scores(cm.tn, cm.fn, cm.fp);
  m.precision = 0.5 * (m.positive.precision + m.negative.precision);
  m.recall = 0.5 * (m.positive.recall + m.negative.recall);
  m.f1 = 0.5 * (m.positive.f1 + m.negative.f1);
  return m;
}

double accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total()); }

std::string format_percent_triple(double a, double b, double c) {
  return fixed(100.0 * a, 2) + " / " + fixed(100.0 * b, 2) + " / " + fixed(100.0 * c, 2);
}

std::string format_rmse_triple(const std::array<double, 3>& rmse) {
  return fixed(rmse[0], 4) + " / " + fixed(rmse[1], 4) + " / " + fixed(rmse[2], 4);
}

Report render_report(std::span<const RunMetrics> runs) {
  if (runs.empty()) throw ValidationError("render_report: no metrics to report (pass at least one run)");
  for (const auto& r : runs)
    if (!r.scores && !r.rmse)
      throw ValidationError("render_report: run '" + r.run_id + "' carries neither classification scores nor RMSEs");

  std::size_t id_w = 6, kind_w = 5, split_w = 5;
  for (const auto& r : runs) {
    id_w = std::max(id_w, r.run_id.size());
    kind_w = std::max(kind_w, r.model_kind.size());
    split_w = std::max(split_w, r.split.size());
  }
  std::ostringstream t;
  const std::string header = pad("run", id_w) + "  " + pad("model", kind_w) + "  " + pad("split", split_w) + "  " +
                             pad("P / R / F1 (%)", 23) + "  RMSE V / A / D";
  t << header << '\n' << std::string(header.size(), '-') << '\n';

  Report report;
  for (const auto& r : runs) {
    const std::string cls = r.scores ? format_percent_triple(r.scores->precision, r.scores->recall, r.scores->f1) : "-";
    const std::string reg = r.rmse ? format_rmse_triple(*r.rmse) : "-";
    t << pad(r.run_id, id_w) << "  " << pad(r.model_kind, kind_w) << "  " << pad(r.split, split_w) << "  "
      << pad(cls, 23) << "  " << reg << '\n';

    std::string row = csv_field(r.run_id) + ',' + csv_field(r.model_kind) + ',' + csv_field(r.split);
    for (int i = 0; i < 3; ++i) {
      row += ',';
      if (r.scores) row += fixed(i == 0 ? r.scores->precision : i == 1 ? r.scores->recall : r.scores->f1, 6);
    }
    for (int i = 0; i < 3; ++i) {
      row += ',';
      if (r.rmse) row += fixed((*r.rmse)[static_cast<std::size_t>(i)], 6);
    }
    report.csv_rows.push_back(std::move(row));
  }
  report.table = t.str();
  return report;
}

}  // namespace mmhs::metrics
