#include "mmhs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "mmhs/csv.hpp"
#include "mmhs/errors.hpp"

namespace mmhs::synth {
namespace {

const std::vector<std::string> kGroups{"people", "men", "women", "immigrants", "foreigners", "neighbors", "outsiders"};
const std::vector<std::string> kPlaces{"park", "city", "school", "market", "station", "village", "office", "beach"};
const std::vector<std::string> kPersons{"friend", "sister", "brother", "teacher", "doctor", "cousin", "uncle"};
const std::vector<std::string> kThings{"music", "weather", "game", "movie", "coffee", "garden", "book", "dinner"};
const std::vector<std::string> kAdjectives{"nice", "great", "quiet", "busy", "lovely", "strange", "good", "long"};

const std::vector<std::string> kMarkerTemplates{
    "those {group} are {marker}",
    "{group} like that are nothing but {marker}!",
    "get rid of the {marker} in the {place}",
    "why do we let these {marker} near our {place}?",
    "all {group} from the {place} are {marker}",
    "the {group} in this {place} are {marker} and {adj} {marker}",
};

const std::vector<std::string> kNeutralTemplates{
    "the {thing} in the {place} was {adj} today",
    "my {person} loves the {adj} {thing}",
    "we met some {group} at the {place}",
    "what a {adj} {thing}!",
    "did you see the {group} at the {place} yesterday?",
    "the {thing} with my {person} was {adj}",
};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

std::string fill(std::string tmpl, const std::string& marker, std::mt19937_64& rng) {
  auto replace = [&](const std::string& key, auto&& value_fn) {
    for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos)) {
      const std::string v = value_fn();
      tmpl.replace(pos, key.size(), v);
      pos += v.size();
    }
  };
  replace("{marker}", [&] { return marker; });
  replace("{group}", [&] { return pick(kGroups, rng); });
  replace("{place}", [&] { return pick(kPlaces, rng); });
  replace("{person}", [&] { return pick(kPersons, rng); });
  replace("{thing}", [&] { return pick(kThings, rng); });
  replace("{adj}", [&] { return pick(kAdjectives, rng); });
  return tmpl;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& marker_words() {
  static const std::vector<std::string> words{"vermin", "scum", "parasites", "filth", "trash", "rats"};
  return words;
}

emotion::EmotionAttributes attributes_of(const ClipParams& p) {
  return {(p.f0 - kMinF0) / (kMaxF0 - kMinF0), p.am_depth,
          (p.amplitude - kMinAmplitude) / (kMaxAmplitude - kMinAmplitude)};
}

signal::AudioSignal synthesize(const ClipParams& p, const SyntheticSpec& spec) {
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));
  const auto lead = static_cast<std::size_t>(std::llround(spec.lead_s * spec.sample_rate));
  const double fs = spec.sample_rate;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  constexpr double vibrato_rate = 5.0;
  constexpr double vibrato_depth = 0.01;
  constexpr int harmonics = 4;
  constexpr double fade_s = 0.01;
  double harmonic_norm = 0.0;
  for (int h = 1; h <= harmonics; ++h) harmonic_norm += 1.0 / h;

  signal::AudioSignal s;
  s.sample_rate = spec.sample_rate;
  s.id = p.id;
  s.samples.resize(n);
  std::mt19937_64 rng(p.noise_seed);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  for (std::size_t i = 0; i < n; ++i) {
    double x = noise(rng);
    if (i >= lead) {
      const double t = static_cast<double>(i - lead) / fs;
      // Phase of f0 * (1 + depth * sin(2 pi r t)).
      const double phase =
          p.f0 * t - p.f0 * vibrato_depth * (std::cos(two_pi * vibrato_rate * t) - 1.0) / (two_pi * vibrato_rate);
      double tone = 0.0;
      for (int h = 1; h <= harmonics; ++h) tone += std::sin(two_pi * h * phase) / h;
      const double envelope = 1.0 - p.am_depth * 0.5 * (1.0 - std::cos(two_pi * p.am_rate * t));
      const double fade = std::min(1.0, t / fade_s);
      x += p.amplitude * fade * envelope * tone / harmonic_norm;
    }
    s.samples[i] = std::clamp(x, -1.0, 1.0);
  }
  return s;
}

SyntheticDataset plan_dataset(const SyntheticSpec& spec) {
  if (spec.positives < 1 || spec.negatives < 1) throw ValidationError("synthetic spec needs at least one clip per class");
  if (spec.duration_s <= spec.lead_s || spec.lead_s <= 0.0 || spec.sample_rate < 8000)
    throw ValidationError("synthetic spec: need 0 < lead < duration and sample rate >= 8000");
  std::mt19937_64 rng(spec.seed);
  const int total = spec.positives + spec.negatives;
  std::vector<int> labels(static_cast<std::size_t>(spec.positives), 1);
  labels.resize(static_cast<std::size_t>(total), 0);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticDataset ds;
  int negatives_seen = 0;
  const int width = static_cast<int>(std::to_string(total).size());
  for (int i = 0; i < total; ++i) {
    ClipParams p;
    const auto number = std::to_string(i + 1);
    p.id = "clip_" + std::string(static_cast<std::size_t>(std::max(width, 4)) - number.size(), '0') + number;
    p.label = labels[static_cast<std::size_t>(i)];
    p.f0 = kMinF0 + (kMaxF0 - kMinF0) * unit(rng);
    p.amplitude = kMinAmplitude + (kMaxAmplitude - kMinAmplitude) * unit(rng);
    bool has_marker = true;
    if (p.label == 1) {
      p.am_depth = 0.6 + 0.4 * unit(rng);
    } else if (negatives_seen++ % 2 == 0) {
      p.am_depth = 0.4 * unit(rng);
    } else {
      has_marker = false;
      p.am_depth = unit(rng);
    }
    p.am_rate = 2.0 + 6.0 * p.am_depth;
    if (has_marker) p.marker = pick(marker_words(), rng);
    p.noise_seed = rng();

    data::ManifestRecord r;
    r.id = p.id;
    r.audio_path = "audio/" + p.id + ".wav";
    r.transcript = fill(has_marker ? pick(kMarkerTemplates, rng) : pick(kNeutralTemplates, rng), p.marker, rng);
    r.label = p.label;
    r.attributes = attributes_of(p);
    ds.records.push_back(std::move(r));
    ds.params.push_back(std::move(p));
  }
  ds.records = data::split_dataset(std::move(ds.records), {}, spec.seed);
  return ds;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  auto ds = plan_dataset(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "audio").string() + ": " + ec.message());
  for (const auto& p : ds.params)
    signal::write_wav(out_dir / "audio" / (p.id + ".wav"), synthesize(p, spec), signal::WavEncoding::Pcm16);

  io::CsvTable params;
  params.header = {"id", "f0", "am_depth", "am_rate", "amplitude", "marker", "label"};
  for (const auto& p : ds.params)
    params.rows.push_back({p.id, fmt17(p.f0), fmt17(p.am_depth), fmt17(p.am_rate), fmt17(p.amplitude), p.marker,
                           std::to_string(p.label)});
  io::write_csv(out_dir / "synth_params.csv", params);
  data::save_manifest(out_dir / "manifest.csv", ds.records);
  return ds;
}

}  // namespace mmhs::synth
