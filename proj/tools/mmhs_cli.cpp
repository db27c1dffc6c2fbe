// mmhs: command-line driver for the multimodal hate-speech toolkit.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmhs/csv.hpp"
#include "mmhs/embedding_file.hpp"
#include "mmhs/errors.hpp"
#include "mmhs/pipeline.hpp"
#include "mmhs/run_config.hpp"
#include "mmhs/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mmhs;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  bool verbose = false;
};

config::RunConfig resolve(const Globals& g) {
  config::RunConfig cfg;
  if (g.config_file) cfg.load_file(*g.config_file);
  for (const auto& o : g.overrides) cfg.set_assignment(o);
  if (g.seed) cfg.set("seed", std::to_string(*g.seed));
  return cfg;
}

void announce(const config::RunConfig& cfg) { std::cerr << "# resolved configuration\n" << cfg.describe(); }

data::Split split_arg(const std::string& s) { return data::parse_split(s); }

void infer_kind(config::RunConfig& cfg, const fs::path& features) {
  const auto table = io::read_feature_file(features);
  cfg.set("feature_kind", table.dim == features::kF1Length ? "f1" : "f2", config::Source::Inferred);
}

void print_metrics(const metrics::RunMetrics& m, const std::optional<fs::path>& out) {
  const std::vector<metrics::RunMetrics> runs{m};
  std::cout << metrics::render_report(runs).table;
  if (out) pipeline::write_metrics_csv(*out, runs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal hate-speech toolkit: audio emotion embeddings fused with text embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base RNG seed (overrides config)");
  app.add_option("--config", g.config_file, "key = value configuration file");
  app.add_option("--set", g.overrides, "Override one config key (key=value); repeatable");
  app.add_flag("-v,--verbose", g.verbose, "Progress messages on stderr");

  std::function<void()> action;

  // denoise
  auto* denoise = app.add_subcommand("denoise", "Spectral-gate a WAV file");
  fs::path dn_in, dn_out;
  std::optional<fs::path> dn_noise;
  denoise->add_option("--in", dn_in, "Input WAV")->required();
  denoise->add_option("--out", dn_out, "Output WAV (float32)")->required();
  denoise->add_option("--noise", dn_noise, "Noise-only clip for the profile");
  std::optional<std::string> dn_reduction, dn_fft;
  denoise->add_option("--reduction-db", dn_reduction, "Attenuation of gated bins (dB)");
  denoise->add_option("--fft-size", dn_fft, "STFT size (even)");
  denoise->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      if (dn_reduction) cfg.set("gate.reduction_db", *dn_reduction);
      if (dn_fft) cfg.set("gate.fft_size", *dn_fft);
      announce(cfg);
      pipeline::denoise_file(dn_in, dn_out, cfg.gate_settings(), dn_noise);
    };
  });

  // features extract
  auto* feats = app.add_subcommand("features", "Audio feature extraction");
  feats->require_subcommand(1);
  auto* extract = feats->add_subcommand("extract", "Extract f1/f2 representations for every manifest row");
  fs::path fx_manifest, fx_out;
  std::optional<std::string> fx_kind;
  bool fx_no_denoise = false, fx_no_clip_csv = false;
  extract->add_option("--manifest", fx_manifest, "Manifest CSV")->required();
  extract->add_option("--out", fx_out, "Output directory")->required();
  extract->add_option("--kind", fx_kind, "f1 or f2")->check(CLI::IsMember({"f1", "f2"}));
  extract->add_flag("--no-denoise", fx_no_denoise, "Skip spectral gating");
  extract->add_flag("--no-clip-csv", fx_no_clip_csv, "Skip per-clip CSV files");
  extract->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      if (fx_kind) cfg.set("feature_kind", *fx_kind);
      announce(cfg);
      pipeline::FeatureOptions o;
      o.kind = cfg.feature_kind();
      o.denoise = !fx_no_denoise;
      o.gate = cfg.gate_settings();
      o.write_clip_csv = !fx_no_clip_csv;
      const auto table = pipeline::extract_features(fx_manifest, fx_out, o);
      std::cout << "wrote " << table.records.size() << " x " << table.dim << " features to "
                << (fx_out / "features.mmfm").string() << '\n';
    };
  });

  // emotion train|eval|embed|tune
  auto* emo = app.add_subcommand("emotion", "Multi-task valence/arousal/dominance model");
  emo->require_subcommand(1);
  fs::path em_features, em_out, em_ckpt;
  std::optional<fs::path> em_manifest, em_labels, em_trace, em_report;
  std::string em_split = "test", em_run = "mtl";

  auto label_source = [&](CLI::App* cmd) {
    auto* m = cmd->add_option("--manifest", em_manifest, "Manifest with valence/arousal/dominance columns");
    auto* l = cmd->add_option("--labels", em_labels, "Labels CSV: id,valence,arousal,dominance[,split]");
    m->excludes(l);
  };
  auto labels = [&](const config::RunConfig& cfg) {
    if (em_labels) return data::load_labels(*em_labels, cfg.seed());
    if (em_manifest) return data::load_manifest(*em_manifest);
    throw ValidationError("emotion commands need --labels or --manifest");
  };

  auto* etrain = emo->add_subcommand("train", "Train the MTL model");
  label_source(etrain);
  etrain->add_option("--features", em_features, "Feature directory or features.mmfm")->required();
  etrain->add_option("--out", em_out, "Checkpoint path")->required();
  etrain->add_option("--trace", em_trace, "Per-epoch loss CSV");
  etrain->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      infer_kind(cfg, pipeline::feature_file(em_features));
      announce(cfg);
      const auto r = pipeline::emotion_train(labels(cfg), em_features, cfg.mtl_config(), em_out, em_trace);
      std::cout << "best epoch " << r.best_epoch << " of " << r.trace.size() << "; checkpoint " << em_out.string()
                << '\n';
    };
  });

  auto* eeval = emo->add_subcommand("eval", "Per-attribute RMSE on a split");
  eeval->add_option("--ckpt", em_ckpt)->required();
  label_source(eeval);
  eeval->add_option("--features", em_features, "Feature directory or features.mmfm")->required();
  eeval->add_option("--split", em_split)->check(CLI::IsMember({"train", "val", "test"}));
  eeval->add_option("--run-id", em_run);
  eeval->add_option("--out", em_report, "Report CSV");
  eeval->callback([&] {
    action = [&] {
      const auto cfg = resolve(g);
      announce(cfg);
      print_metrics(pipeline::emotion_eval(em_ckpt, labels(cfg), em_features, split_arg(em_split), em_run), em_report);
    };
  });

  auto* eembed = emo->add_subcommand("embed", "Write 510-dim speech embeddings");
  eembed->add_option("--ckpt", em_ckpt)->required();
  eembed->add_option("--features", em_features, "Feature directory or features.mmfm")->required();
  eembed->add_option("--out", em_out, "Embedding file (MMEB)")->required();
  eembed->callback([&] {
    action = [&] {
      announce(resolve(g));
      pipeline::emotion_embed(em_ckpt, em_features, em_out);
    };
  });

  auto* etune = emo->add_subcommand("tune", "Grid search over loss weights");
  label_source(etune);
  etune->add_option("--features", em_features, "Feature directory or features.mmfm")->required();
  etune->add_option("--out", em_out, "Grid report CSV")->required();
  etune->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      infer_kind(cfg, pipeline::feature_file(em_features));
      announce(cfg);
      const auto r = pipeline::emotion_tune(labels(cfg), em_features, cfg.mtl_config(), em_out);
      std::cout << "best weights alpha " << r.best.alpha << " beta " << r.best.beta << " gamma " << r.best.gamma
                << '\n';
    };
  });

  // text embed
  auto* txt = app.add_subcommand("text", "Text embeddings");
  txt->require_subcommand(1);
  auto* tembed = txt->add_subcommand("embed", "Write 768-dim text embeddings for manifest transcripts");
  fs::path tx_manifest, tx_out;
  std::optional<std::string> tx_pooling, tx_provider;
  std::optional<fs::path> tx_provider_file, tx_vocab;
  tembed->add_option("--manifest", tx_manifest)->required();
  tembed->add_option("--out", tx_out, "Embedding file (MMEB)")->required();
  tembed->add_option("--mode,--pooling", tx_pooling, "cls or mean")->check(CLI::IsMember({"cls", "mean"}));
  tembed->add_option("--provider", tx_provider, "stub or file")->check(CLI::IsMember({"stub", "file"}));
  tembed->add_option("--embeddings,--provider-file", tx_provider_file, "Precomputed embeddings for provider 'file'");
  tembed->add_option("--vocab", tx_vocab, "WordPiece vocabulary (one token per line)");

  auto text_options = [&](config::RunConfig& cfg) {
    if (tx_pooling) cfg.set("pooling", *tx_pooling);
    if (tx_provider) cfg.set("provider", *tx_provider);
    pipeline::TextEmbedOptions o;
    o.pooling = cfg.pooling();
    o.provider = cfg.provider();
    o.provider_file = tx_provider_file;
    o.vocabulary = tx_vocab;
    return o;
  };
  tembed->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      const auto o = text_options(cfg);
      announce(cfg);
      pipeline::text_embed(tx_manifest, tx_out, o);
    };
  });

  // fuse train|eval
  auto* fuse = app.add_subcommand("fuse", "Multimodal fusion classifier");
  fuse->require_subcommand(1);
  fs::path fu_text, fu_speech, fu_manifest, fu_out, fu_ckpt;
  std::optional<fs::path> fu_trace, fu_report, fu_predictions;
  bool fu_zero_speech = false;
  std::string fu_split = "test";
  std::optional<std::string> fu_run;

  auto* ftrain = fuse->add_subcommand("train", "Train the fusion classifier");
  ftrain->add_option("--text-emb", fu_text)->required();
  ftrain->add_option("--speech-emb", fu_speech)->required();
  ftrain->add_option("--manifest", fu_manifest)->required();
  ftrain->add_option("--out", fu_out, "Checkpoint path")->required();
  ftrain->add_option("--trace", fu_trace, "Per-epoch loss CSV");
  ftrain->add_flag("--zero-speech", fu_zero_speech, "Ablation: replace speech embeddings by zeros");
  ftrain->callback([&] {
    action = [&] {
      const auto cfg = resolve(g);
      announce(cfg);
      const auto r = pipeline::fuse_train(fu_text, fu_speech, fu_manifest, cfg.fusion_config(), fu_out,
                                          fu_zero_speech, fu_trace);
      std::cout << "stopped at epoch " << r.stopped_epoch << ", best epoch " << r.best_epoch << "; checkpoint "
                << fu_out.string() << '\n';
    };
  });

  auto* feval = fuse->add_subcommand("eval", "Macro P/R/F1 on a split");
  feval->add_option("--ckpt", fu_ckpt)->required();
  feval->add_option("--text-emb", fu_text)->required();
  feval->add_option("--speech-emb", fu_speech)->required();
  feval->add_option("--manifest", fu_manifest)->required();
  feval->add_option("--split", fu_split)->check(CLI::IsMember({"train", "val", "test"}));
  feval->add_option("--run-id", fu_run);
  feval->add_option("--out", fu_report, "Report CSV");
  feval->add_option("--predictions", fu_predictions, "Per-row predictions CSV");
  feval->add_flag("--zero-speech", fu_zero_speech, "Ablation: replace speech embeddings by zeros");
  feval->callback([&] {
    action = [&] {
      announce(resolve(g));
      const auto run = fu_run.value_or(fu_zero_speech ? "text_only" : "mml");
      print_metrics(pipeline::fuse_eval(fu_ckpt, fu_text, fu_speech, fu_manifest, split_arg(fu_split), fu_zero_speech,
                                        run, fu_predictions),
                    fu_report);
    };
  });

  // predict
  auto* pred = app.add_subcommand("predict", "Classify one clip and transcript end to end");
  fs::path pr_ckpt, pr_emotion, pr_audio;
  std::optional<fs::path> pr_transcript;
  std::optional<std::string> pr_text;
  std::string pr_id = "clip";
  bool pr_no_denoise = false;
  pred->add_option("--ckpt", pr_ckpt, "Fusion checkpoint")->required();
  pred->add_option("--emotion-ckpt", pr_emotion, "MTL checkpoint")->required();
  pred->add_option("--audio", pr_audio, "WAV file")->required();
  auto* tr_opt = pred->add_option("--transcript", pr_transcript, "Transcript text file");
  auto* text_opt = pred->add_option("--text", pr_text, "Transcript given inline");
  tr_opt->excludes(text_opt);
  pred->add_option("--id", pr_id, "Record id (used by provider 'file')");
  pred->add_option("--provider", tx_provider, "stub or file")->check(CLI::IsMember({"stub", "file"}));
  pred->add_option("--embeddings,--provider-file", tx_provider_file);
  pred->add_option("--mode,--pooling", tx_pooling, "cls or mean")->check(CLI::IsMember({"cls", "mean"}));
  pred->add_option("--vocab", tx_vocab);
  pred->add_flag("--no-denoise", pr_no_denoise, "Skip spectral gating");
  pred->callback([&] {
    action = [&] {
      if (!pr_transcript && !pr_text) throw ValidationError("predict needs --transcript or --text");
      auto cfg = resolve(g);
      const auto o = text_options(cfg);
      announce(cfg);
      const std::string transcript = pr_text ? *pr_text : io::read_text_file(*pr_transcript);
      const auto r = pipeline::predict_clip(pr_ckpt, pr_emotion, pr_audio, transcript, o, pr_id, !pr_no_denoise,
                                            cfg.gate_settings());
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", r.prediction.probability);
      std::cout << "probability " << buf << '\n'
                << "label " << (r.prediction.label == fusion::Label::HateSpeech ? "HateSpeech" : "NotHateSpeech")
                << '\n';
      std::snprintf(buf, sizeof buf, "%.4f %.4f %.4f", r.attributes.valence, r.attributes.arousal,
                    r.attributes.dominance);
      std::cout << "valence/arousal/dominance " << buf << '\n';
    };
  });

  // synth generate
  auto* synth = app.add_subcommand("synth", "Synthetic dataset");
  synth->require_subcommand(1);
  auto* gen = synth->add_subcommand("generate", "Write WAVs, manifest.csv and synth_params.csv");
  fs::path sy_out;
  synth::SyntheticSpec sy_spec;
  gen->add_option("--out", sy_out, "Output directory")->required();
  gen->add_option("--positives", sy_spec.positives, "Label-1 clips")->check(CLI::PositiveNumber);
  gen->add_option("--negatives", sy_spec.negatives, "Label-0 clips")->check(CLI::PositiveNumber);
  gen->add_option("--duration", sy_spec.duration_s, "Clip length in seconds")->check(CLI::PositiveNumber);
  gen->callback([&] {
    action = [&] {
      const auto cfg = resolve(g);
      announce(cfg);
      sy_spec.seed = cfg.seed();
      const auto ds = synth::generate_synthetic(sy_spec, sy_out);
      std::cout << "wrote " << ds.records.size() << " clips to " << sy_out.string() << '\n';
    };
  });

  // report
  auto* report = app.add_subcommand("report", "Render report CSVs as one table");
  std::vector<fs::path> rp_in;
  std::optional<fs::path> rp_out;
  report->add_option("--in", rp_in, "Report CSV; repeatable")->required();
  report->add_option("--out", rp_out, "Combined CSV");
  report->callback([&] {
    action = [&] {
      std::vector<metrics::RunMetrics> runs;
      for (const auto& p : rp_in) {
        auto r = pipeline::read_metrics_csv(p);
        runs.insert(runs.end(), r.begin(), r.end());
      }
      std::cout << metrics::render_report(runs).table;
      if (rp_out) pipeline::write_metrics_csv(*rp_out, runs);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (g.verbose) pipeline::set_log_stream(&std::cerr);
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
