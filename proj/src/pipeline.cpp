#include "mmhs/pipeline.hpp"

#include <charconv>
#include <cmath>

#include "mmhs/checkpoint.hpp"
#include "mmhs/csv.hpp"
#include "mmhs/errors.hpp"

namespace mmhs::pipeline {
namespace {

std::ostream* g_log = nullptr;
constexpr int kCanonicalRate = 44100;

std::vector<float> to_float(std::span<const double> v) { return std::vector<float>(v.begin(), v.end()); }

const std::vector<double>& lookup(const std::map<std::string, std::vector<double>>& table, const std::string& id,
                                  const Path& source) {
  const auto it = table.find(id);
  if (it == table.end()) throw ValidationError(source.string() + ": no vector for id '" + id + "'");
  return it->second;
}

std::vector<emotion::LabeledFeatures> labeled_split(const data::Manifest& m,
                                                    const std::map<std::string, std::vector<double>>& raw,
                                                    const features::FeatureScaler& scaler, data::Split split,
                                                    const Path& features_path) {
  std::vector<emotion::LabeledFeatures> out;
  for (const auto* r : m.in_split(split)) {
    if (!r->attributes) continue;
    out.push_back({r->id, scaler.transform(lookup(raw, r->id, features_path)), *r->attributes});
  }
  return out;
}

std::vector<fusion::LabeledEmbedding> fused_split(const data::Manifest& m, const io::VectorTable& text_table,
                                                  const io::VectorTable& speech_table, data::Split split,
                                                  bool zero_speech, const Path& text_path, const Path& speech_path) {
  if (text_table.dim != fusion::kTextDim)
    throw DimensionError(text_path.string() + ": text embeddings must have dimension 768, found " +
                         std::to_string(text_table.dim));
  if (speech_table.dim != fusion::kSpeechDim)
    throw DimensionError(speech_path.string() + ": speech embeddings must have dimension 510, found " +
                         std::to_string(speech_table.dim));
  const auto text = load_vectors(text_table);
  const auto speech = load_vectors(speech_table);
  std::vector<fusion::LabeledEmbedding> out;
  for (const auto* r : m.in_split(split)) {
    text::TextEmbedding t{lookup(text, r->id, text_path), text::PoolingMode::Cls, "file"};
    emotion::SpeechEmbedding s{lookup(speech, r->id, speech_path)};
    if (zero_speech) std::fill(s.values.begin(), s.values.end(), 0.0);
    out.push_back({r->id, fusion::fuse(t, s).values, r->label});
  }
  return out;
}

std::unique_ptr<text::EmbeddingProvider> make_provider(const TextEmbedOptions& o) {
  if (o.provider == "stub") return std::make_unique<text::StubEmbeddingProvider>();
  if (o.provider == "file") {
    if (!o.provider_file) throw ValidationError("provider 'file' needs an embedding file");
    return std::make_unique<text::FileEmbeddingProvider>(text::FileEmbeddingProvider::open(*o.provider_file));
  }
  throw ValidationError("unknown provider '" + o.provider + "' (expected stub or file)");
}

text::Vocabulary vocabulary_for(const TextEmbedOptions& o) {
  return o.vocabulary ? text::Vocabulary::from_file(*o.vocabulary) : text::Vocabulary::demo();
}

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void set_log_stream(std::ostream* out) { g_log = out; }

void log(const std::string& message) {
  if (g_log) *g_log << "[mmhs] " << message << '\n';
}

signal::AudioSignal load_audio(const Path& path, bool denoise, const signal::GateSettings& gate) {
  auto audio = signal::read_wav(path);
  if (audio.sample_rate != kCanonicalRate) audio = signal::resample(audio, kCanonicalRate);
  return denoise ? signal::denoise(audio, gate) : audio;
}

void denoise_file(const Path& in, const Path& out, const signal::GateSettings& gate, const std::optional<Path>& noise_clip) {
  const auto audio = signal::read_wav(in);
  signal::AudioSignal clean;
  if (noise_clip) {
    auto noise = signal::read_wav(*noise_clip);
    if (noise.sample_rate != audio.sample_rate) noise = signal::resample(noise, audio.sample_rate);
    clean = signal::denoise(audio, noise, gate);
  } else {
    clean = signal::denoise(audio, gate);
  }
  signal::write_wav(out, clean, signal::WavEncoding::Float32);
}

io::VectorTable extract_features(const Path& manifest_path, const Path& out_dir, const FeatureOptions& options) {
  const auto manifest = data::load_manifest(manifest_path);
  std::error_code ec;
  std::filesystem::create_directories(options.write_clip_csv ? out_dir / "clips" : out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  io::VectorTable table;
  table.dim = static_cast<std::uint32_t>(features::representation_length(options.kind));
  const auto names = features::representation_feature_names(options.kind);
  for (const auto& r : manifest.records) {
    const auto audio = load_audio(manifest.audio_path(r), options.denoise, options.gate);
    const auto st = features::short_term_features(audio);
    const auto mt = features::mid_term_features(st);
    const auto rep = options.kind == features::RepresentationKind::F1 ? features::make_f1(mt) : features::make_f2(mt);
    for (double v : rep.values)
      if (!std::isfinite(v)) throw NumericError("non-finite feature value for clip '" + r.id + "'");
    table.records.push_back({r.id, to_float(rep.values)});
    if (options.write_clip_csv) {
      io::CsvTable clip;
      clip.header = names;
      io::CsvRow row;
      for (double v : rep.values) row.push_back(io::format_double(v));
      clip.rows.push_back(std::move(row));
      io::write_csv(out_dir / "clips" / (r.id + ".csv"), clip);
    }
    log("features " + r.id + ": " + std::to_string(st.frames()) + " frames, " + std::to_string(mt.windows()) +
        " mid-term windows");
  }
  io::write_feature_file(out_dir / "features.mmfm", table);
  return table;
}

std::map<std::string, std::vector<double>> load_vectors(const io::VectorTable& table) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& r : table.records) out.emplace(r.id, std::vector<double>(r.values.begin(), r.values.end()));
  return out;
}

Path feature_file(const Path& features) {
  return std::filesystem::is_directory(features) ? features / "features.mmfm" : features;
}

emotion::MtlTrainResult emotion_train(const data::Manifest& manifest, const Path& features_dir,
                                      const emotion::MtlConfig& config, const Path& out_ckpt,
                                      const std::optional<Path>& trace_csv) {
  const auto features_path = feature_file(features_dir);
  const auto table = io::read_feature_file(features_path);
  if (table.dim != features::representation_length(config.kind))
    throw DimensionError(features_path.string() + ": feature dimension " + std::to_string(table.dim) +
                         " does not match feature_kind " + std::string(features::to_string(config.kind)));
  const auto raw = load_vectors(table);

  std::vector<features::FeatureRepresentation> fit;
  for (const auto* r : manifest.in_split(data::Split::Train))
    if (r->attributes) fit.push_back({config.kind, lookup(raw, r->id, features_path)});
  if (fit.empty()) throw ValidationError("emotion train: no training rows with valence/arousal/dominance");
  const auto scaler = features::fit_scaler(fit);
  const auto train = labeled_split(manifest, raw, scaler, data::Split::Train, features_path);
  const auto val = labeled_split(manifest, raw, scaler, data::Split::Val, features_path);
  log("emotion train: " + std::to_string(train.size()) + " train / " + std::to_string(val.size()) + " val rows");

  auto result = emotion::train_mtl(config, scaler, train, val);
  for (const auto& e : result.trace)
    log("epoch " + std::to_string(e.epoch) + " train " + fixed6(e.train_loss) + " val " + fixed6(e.validation_loss));
  io::save_checkpoint(out_ckpt, result.model);
  if (trace_csv) {
    io::CsvTable t;
    t.header = {"epoch", "train_loss", "validation_loss", "learning_rate"};
    for (const auto& e : result.trace)
      t.rows.push_back({std::to_string(e.epoch), io::format_double(e.train_loss), io::format_double(e.validation_loss),
                        io::format_double(e.learning_rate)});
    io::write_csv(*trace_csv, t);
  }
  return result;
}

metrics::RunMetrics emotion_eval(const Path& ckpt, const data::Manifest& manifest, const Path& features_dir,
                                 data::Split split, const std::string& run_id) {
  const auto features_path = feature_file(features_dir);
  const auto model = io::load_mtl_checkpoint(ckpt);
  const auto raw = load_vectors(io::read_feature_file(features_path));
  const auto samples = labeled_split(manifest, raw, model.scaler(), split, features_path);
  if (samples.empty())
    throw ValidationError("emotion eval: no rows with attributes in split '" + std::string(data::to_string(split)) + "'");
  metrics::RunMetrics m;
  m.run_id = run_id;
  m.model_kind = "mtl_" + std::string(features::to_string(model.config().kind));
  m.split = data::to_string(split);
  m.rmse = emotion::evaluate_rmse(model, samples);
  return m;
}

void emotion_embed(const Path& ckpt, const Path& features_dir, const Path& out_embeddings) {
  const auto model = io::load_mtl_checkpoint(ckpt);
  const auto table = io::read_feature_file(feature_file(features_dir));
  io::VectorTable out;
  out.dim = static_cast<std::uint32_t>(fusion::kSpeechDim);
  for (const auto& r : table.records) {
    const std::vector<double> raw(r.values.begin(), r.values.end());
    const features::FeatureRepresentation scaled{model.config().kind, model.scaler().transform(raw)};
    const auto e = emotion::extract_speech_embedding(model, scaled);
    if (e.values.size() != fusion::kSpeechDim)
      throw DimensionError("speech embedding has length " + std::to_string(e.values.size()) + ", expected 510");
    out.records.push_back({r.id, to_float(e.values)});
  }
  io::write_embedding_file(out_embeddings, out);
}

emotion::TuneResult emotion_tune(const data::Manifest& manifest, const Path& features_dir,
                                 const emotion::MtlConfig& base, const Path& out_csv) {
  const auto features_path = feature_file(features_dir);
  const auto raw = load_vectors(io::read_feature_file(features_path));
  std::vector<features::FeatureRepresentation> fit;
  for (const auto* r : manifest.in_split(data::Split::Train))
    if (r->attributes) fit.push_back({base.kind, lookup(raw, r->id, features_path)});
  if (fit.empty()) throw ValidationError("emotion tune: no training rows with valence/arousal/dominance");
  const auto scaler = features::fit_scaler(fit);
  const auto train = labeled_split(manifest, raw, scaler, data::Split::Train, features_path);
  const auto val = labeled_split(manifest, raw, scaler, data::Split::Val, features_path);
  auto result = emotion::tune_loss_weights(base, scaler, train, val);
  io::CsvTable t;
  t.header = {"alpha", "beta", "gamma", "rmse_val", "rmse_aro", "rmse_dom", "mean_rmse"};
  for (const auto& row : result.report)
    t.rows.push_back({io::format_double(row.weights.alpha), io::format_double(row.weights.beta),
                      io::format_double(row.weights.gamma), fixed6(row.validation_rmse[0]),
                      fixed6(row.validation_rmse[1]), fixed6(row.validation_rmse[2]), fixed6(row.mean_rmse)});
  io::write_csv(out_csv, t);
  return result;
}

void text_embed(const Path& manifest_path, const Path& out_embeddings, const TextEmbedOptions& options) {
  const auto manifest = data::load_manifest(manifest_path);
  const auto provider = make_provider(options);
  const auto vocab = vocabulary_for(options);
  io::VectorTable out;
  out.dim = static_cast<std::uint32_t>(text::kEmbeddingDim);
  for (const auto& r : manifest.records) {
    const auto seq = text::tokenize(text::preprocess_text(r.transcript), vocab);
    const auto e = provider->embed(r.id, seq, options.pooling);
    out.records.push_back({r.id, to_float(e.values)});
  }
  io::write_embedding_file(out_embeddings, out);
}

fusion::FusionTrainResult fuse_train(const Path& text_path, const Path& speech_path, const Path& manifest_path,
                                     const fusion::FusionConfig& config, const Path& out_ckpt, bool zero_speech,
                                     const std::optional<Path>& trace_csv) {
  const auto manifest = data::load_manifest(manifest_path);
  const auto text_table = io::read_embedding_file(text_path);
  const auto speech_table = io::read_embedding_file(speech_path);
  const auto train = fused_split(manifest, text_table, speech_table, data::Split::Train, zero_speech, text_path, speech_path);
  const auto val = fused_split(manifest, text_table, speech_table, data::Split::Val, zero_speech, text_path, speech_path);
  log("fuse train: " + std::to_string(train.size()) + " train / " + std::to_string(val.size()) + " val rows" +
      (zero_speech ? " (speech zeroed)" : ""));
  auto result = fusion::train_fusion(config, train, val);
  log("fuse train: stopped at epoch " + std::to_string(result.stopped_epoch) + ", best epoch " +
      std::to_string(result.best_epoch));
  io::save_checkpoint(out_ckpt, result.model);
  if (trace_csv) {
    io::CsvTable t;
    t.header = {"epoch", "train_loss", "validation_loss", "learning_rate"};
    for (const auto& e : result.trace)
      t.rows.push_back({std::to_string(e.epoch), io::format_double(e.train_loss), io::format_double(e.validation_loss),
                        io::format_double(e.learning_rate)});
    io::write_csv(*trace_csv, t);
  }
  return result;
}

metrics::RunMetrics fuse_eval(const Path& ckpt, const Path& text_path, const Path& speech_path,
                              const Path& manifest_path, data::Split split, bool zero_speech,
                              const std::string& run_id, const std::optional<Path>& predictions_csv) {
  const auto model = io::load_fusion_checkpoint(ckpt);
  const auto manifest = data::load_manifest(manifest_path);
  const auto samples = fused_split(manifest, io::read_embedding_file(text_path), io::read_embedding_file(speech_path),
                                   split, zero_speech, text_path, speech_path);
  if (samples.empty())
    throw ValidationError("fuse eval: split '" + std::string(data::to_string(split)) + "' is empty");
  std::vector<int> predicted, targets;
  io::CsvTable preds;
  preds.header = {"id", "probability", "predicted", "label"};
  for (const auto& s : samples) {
    const auto p = fusion::predict(model, s.values);
    predicted.push_back(static_cast<int>(p.label));
    targets.push_back(s.label);
    preds.rows.push_back({s.id, fixed6(p.probability), std::to_string(predicted.back()), std::to_string(s.label)});
  }
  if (predictions_csv) io::write_csv(*predictions_csv, preds);
  metrics::RunMetrics m;
  m.run_id = run_id;
  m.model_kind = zero_speech ? "fusion_text_only" : "fusion";
  m.split = data::to_string(split);
  m.scores = metrics::macro_scores(metrics::confusion(predicted, targets));
  return m;
}

ClipPrediction predict_clip(const Path& fusion_ckpt, const Path& emotion_ckpt, const Path& audio_path,
                            const std::string& transcript, const TextEmbedOptions& text_options,
                            const std::string& clip_id, bool denoise, const signal::GateSettings& gate) {
  const auto fusion_model = io::load_fusion_checkpoint(fusion_ckpt);
  const auto mtl = io::load_mtl_checkpoint(emotion_ckpt);
  const auto audio = load_audio(audio_path, denoise, gate);
  const auto raw = features::extract_representation(audio, mtl.config().kind);
  const auto scaled = features::apply_scaler(mtl.scaler(), raw);
  const auto speech = emotion::extract_speech_embedding(mtl, scaled);

  const auto provider = make_provider(text_options);
  const auto seq = text::tokenize(text::preprocess_text(transcript), vocabulary_for(text_options));
  const auto text_embedding = provider->embed(clip_id, seq, text_options.pooling);

  ClipPrediction out;
  out.prediction = fusion::predict(fusion_model, fusion::fuse(text_embedding, speech));
  out.attributes = emotion::predict_attributes(mtl, scaled);
  return out;
}

void write_metrics_csv(const Path& path, std::span<const metrics::RunMetrics> runs) {
  const auto report = metrics::render_report(runs);
  std::string text = std::string(metrics::kReportCsvHeader) + '\n';
  for (const auto& row : report.csv_rows) text += row + '\n';
  io::write_text_file(path, text);
}

std::vector<metrics::RunMetrics> read_metrics_csv(const Path& path) {
  const auto table = io::read_csv(path);
  if (io::format_csv_row(table.header) != metrics::kReportCsvHeader)
    throw SchemaError(path.string() + ": expected header " + metrics::kReportCsvHeader);
  auto real = [&](const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw ValidationError(path.string() + ": line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
  };
  std::vector<metrics::RunMetrics> runs;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto line = table.line_numbers[i];
    if (row.size() != 9) throw ValidationError(path.string() + ": line " + std::to_string(line) + ": expected 9 fields");
    metrics::RunMetrics m{row[0], row[1], row[2], std::nullopt, std::nullopt};
    if (!row[3].empty() || !row[4].empty() || !row[5].empty()) {
      metrics::MacroScores s;
      s.precision = real(row[3], line);
      s.recall = real(row[4], line);
      s.f1 = real(row[5], line);
      m.scores = s;
    }
    if (!row[6].empty() || !row[7].empty() || !row[8].empty())
      m.rmse = std::array<double, 3>{real(row[6], line), real(row[7], line), real(row[8], line)};
    runs.push_back(std::move(m));
  }
  return runs;
}

}  // namespace mmhs::pipeline
