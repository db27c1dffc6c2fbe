#include "mmhs/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "mmhs/csv.hpp"
#include "mmhs/errors.hpp"

namespace mmhs::data {
namespace {

std::optional<double> parse_real(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

std::filesystem::path Manifest::audio_path(const ManifestRecord& record) const {
  const std::filesystem::path p(record.audio_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<const ManifestRecord*> Manifest::in_split(Split split) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

const ManifestRecord* Manifest::find(std::string_view id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

Manifest parse_manifest(std::string_view text, const std::string& source) {
  const auto table = io::parse_csv(text, source);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < table.header.size(); ++i) col.emplace(table.header[i], i);
  for (const char* name : kRequiredColumns)
    if (!col.count(name)) throw SchemaError(source + ": missing column '" + std::string(name) + "'");
  std::size_t attr_present = 0;
  for (const char* name : kAttributeColumns) attr_present += col.count(name);
  if (attr_present != 0 && attr_present != kAttributeColumns.size())
    throw SchemaError(source + ": valence, arousal and dominance columns must appear together");

  Manifest m;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = source + ": line " + std::to_string(table.line_numbers[r]);
    if (row.size() != table.header.size())
      throw ValidationError(where + ": expected " + std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(row.size()));
    ManifestRecord rec;
    rec.id = row[col["id"]];
    if (rec.id.empty()) throw ValidationError(where + ": empty id");
    if (!seen.insert(rec.id).second) throw ValidationError(where + ": duplicate id '" + rec.id + "'");
    rec.audio_path = row[col["audio_path"]];
    rec.transcript = row[col["transcript"]];
    const auto& label = row[col["label"]];
    if (label != "0" && label != "1")
      throw ValidationError(where + ": label must be 0 or 1, got '" + label + "'");
    rec.label = label == "1" ? 1 : 0;
    const auto& split = row[col["split"]];
    if (!split.empty()) {
      try {
        rec.split = parse_split(split);
      } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
      }
    }
    if (attr_present) {
      std::array<double, 3> v{};
      bool any = false, all = true;
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& cell = row[col[kAttributeColumns[k]]];
        if (cell.empty()) {
          all = false;
          continue;
        }
        any = true;
        const auto parsed = parse_real(cell);
        if (!parsed || !std::isfinite(*parsed) || *parsed < 0.0 || *parsed > 1.0)
          throw ValidationError(where + ": " + kAttributeColumns[k] + " must be a real in [0, 1], got '" + cell + "'");
        v[k] = *parsed;
      }
      if (any && !all) throw ValidationError(where + ": valence, arousal and dominance must be given together");
      if (all) rec.attributes = emotion::EmotionAttributes{v[0], v[1], v[2]};
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  auto m = parse_manifest(io::read_text_file(path), path.string());
  m.base_dir = path.parent_path();
  return m;
}

Manifest parse_labels(std::string_view text, std::uint64_t seed, const std::string& source) {
  const auto table = io::parse_csv(text, source);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < table.header.size(); ++i) col.emplace(table.header[i], i);
  for (const char* name : {"id", "valence", "arousal", "dominance"})
    if (!col.count(name)) throw SchemaError(source + ": missing column '" + std::string(name) + "'");
  const bool has_split = col.count("split") > 0;

  Manifest m;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = source + ": line " + std::to_string(table.line_numbers[r]);
    if (row.size() != table.header.size())
      throw ValidationError(where + ": expected " + std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(row.size()));
    ManifestRecord rec;
    rec.id = row[col["id"]];
    if (rec.id.empty()) throw ValidationError(where + ": empty id");
    if (!seen.insert(rec.id).second) throw ValidationError(where + ": duplicate id '" + rec.id + "'");
    std::array<double, 3> v{};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& cell = row[col[kAttributeColumns[k]]];
      const auto parsed = parse_real(cell);
      if (!parsed || !std::isfinite(*parsed) || *parsed < 0.0 || *parsed > 1.0)
        throw ValidationError(where + ": " + kAttributeColumns[k] + " must be a real in [0, 1], got '" + cell + "'");
      v[k] = *parsed;
    }
    rec.attributes = emotion::EmotionAttributes{v[0], v[1], v[2]};
    if (has_split) {
      try {
        rec.split = parse_split(row[col["split"]]);
      } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
      }
    }
    m.records.push_back(std::move(rec));
  }
  if (!has_split) m.records = split_dataset(std::move(m.records), {}, seed);
  return m;
}

Manifest load_labels(const std::filesystem::path& path, std::uint64_t seed) {
  auto m = parse_labels(io::read_text_file(path), seed, path.string());
  m.base_dir = path.parent_path();
  return m;
}

std::string format_manifest(std::span<const ManifestRecord> records) {
  const bool with_attrs =
      std::any_of(records.begin(), records.end(), [](const auto& r) { return r.attributes.has_value(); });
  io::CsvTable t;
  t.header.assign(kRequiredColumns.begin(), kRequiredColumns.end());
  if (with_attrs) t.header.insert(t.header.end(), kAttributeColumns.begin(), kAttributeColumns.end());
  for (const auto& r : records) {
    io::CsvRow row{r.id, r.audio_path, r.transcript, r.label ? "1" : "0",
                   r.split ? std::string(to_string(*r.split)) : std::string()};
    if (with_attrs) {
      if (r.attributes) {
        for (double v : r.attributes->as_array()) row.push_back(io::format_double(v));
      } else {
        row.insert(row.end(), 3, std::string());
      }
    }
    t.rows.push_back(std::move(row));
  }
  return io::format_csv(t);
}

void save_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records) {
  io::write_text_file(path, format_manifest(records));
}

std::vector<ManifestRecord> split_dataset(std::vector<ManifestRecord> records, const SplitRatios& ratios,
                                          std::uint64_t seed) {
  if (records.size() < 3)
    throw ValidationError("split_dataset: need at least 3 records, got " + std::to_string(records.size()));
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ValidationError("split_dataset: ratios must be non-negative and sum to 1");
  const std::size_t n = records.size();
  // The small epsilon keeps 0.1 * 10 from flooring to 0 through rounding.
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.val + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.test + 1e-9));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  for (std::size_t k = 0; k < n; ++k) {
    Split s = Split::Train;
    if (k < n_val) s = Split::Val;
    else if (k < n_val + n_test) s = Split::Test;
    records[order[k]].split = s;
  }
  return records;
}

}  // namespace mmhs::data
