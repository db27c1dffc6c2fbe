#include "mmhs/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "mmhs/csv.hpp"
#include "mmhs/errors.hpp"

namespace mmhs::config {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_known(std::string_view key) {
  const auto& keys = known_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const KeyInfo& k) { return k.name == key; });
}

template <typename T>
T parse_number(std::string_view key, const std::string& text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ValidationError("config key '" + std::string(key) + "': cannot parse '" + text + "' as a number");
  return v;
}

}  // namespace

std::string_view to_string(Source source) {
  switch (source) {
    case Source::Default: return "default";
    case Source::Inferred: return "inferred";
    case Source::File: return "file";
    case Source::Cli: return "cli";
  }
  return "default";
}

const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys{
      {"seed", "base RNG seed for splitting, initialisation, shuffling and dropout"},
      {"feature_kind", "audio representation: f1 (136) or f2 (1360)"},
      {"provider", "text embedding provider: stub or file"},
      {"pooling", "text pooling: cls or mean"},
      {"gate.fft_size", "spectral gate FFT size"},
      {"gate.sensitivity", "noise threshold multiplier"},
      {"gate.reduction_db", "attenuation of gated bins"},
      {"gate.profile_ms", "leading segment used as noise profile"},
      {"mtl.shared1", "first shared layer width"},
      {"mtl.shared2", "second shared layer width"},
      {"mtl.head_size", "units per attribute head"},
      {"mtl.dropout", "dropout after each shared layer"},
      {"mtl.alpha", "valence loss weight"},
      {"mtl.beta", "arousal loss weight"},
      {"mtl.gamma", "dominance loss weight"},
      {"mtl.lr", "learning rate"},
      {"mtl.decay", "per-epoch learning-rate decay"},
      {"mtl.l2", "L2 coefficient"},
      {"mtl.batch", "batch size"},
      {"mtl.epochs", "training epochs"},
      {"fusion.hidden1", "first hidden layer width"},
      {"fusion.hidden2", "second hidden layer width"},
      {"fusion.hidden3", "third hidden layer width"},
      {"fusion.dropout1", "dropout after hidden layer 1"},
      {"fusion.dropout2", "dropout after hidden layer 2"},
      {"fusion.l2", "L2 coefficient on weights"},
      {"fusion.threshold", "decision threshold"},
      {"fusion.lr", "learning rate"},
      {"fusion.decay", "per-epoch learning-rate decay"},
      {"fusion.patience", "early-stopping patience in epochs"},
      {"fusion.batch", "batch size"},
      {"fusion.max_epochs", "epoch limit"},
  };
  return keys;
}

void RunConfig::load_file(const std::filesystem::path& path) { parse_text(io::read_text_file(path), path.string()); }

void RunConfig::parse_text(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError(source + ": line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(std::string_view(t).substr(0, eq));
    try {
      set(key, trim(std::string_view(t).substr(eq + 1)), Source::File);
    } catch (const ValidationError& e) {
      throw ValidationError(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::set(std::string_view key, std::string value, Source source) {
  if (!is_known(key)) throw ValidationError("unknown config key '" + std::string(key) + "'");
  if (source == Source::Default) return;
  auto& layer = source == Source::File ? file_ : source == Source::Cli ? cli_ : inferred_;
  layer.insert_or_assign(std::string(key), std::move(value));
}

void RunConfig::set_assignment(std::string_view assignment, Source source) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ValidationError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), source);
}

Source RunConfig::source_of(std::string_view key) const {
  if (cli_.count(key)) return Source::Cli;
  if (file_.count(key)) return Source::File;
  if (inferred_.count(key)) return Source::Inferred;
  return Source::Default;
}

std::string RunConfig::get(std::string_view key) const {
  if (!is_known(key)) throw ValidationError("unknown config key '" + std::string(key) + "'");
  if (auto it = cli_.find(key); it != cli_.end()) return it->second;
  if (auto it = file_.find(key); it != file_.end()) return it->second;
  if (auto it = inferred_.find(key); it != inferred_.end()) return it->second;
  return default_value(key);
}

int RunConfig::get_int(std::string_view key) const { return parse_number<int>(key, get(key)); }
double RunConfig::get_double(std::string_view key) const { return parse_number<double>(key, get(key)); }
std::uint64_t RunConfig::get_u64(std::string_view key) const { return parse_number<std::uint64_t>(key, get(key)); }

features::RepresentationKind RunConfig::feature_kind() const { return features::parse_representation_kind(get("feature_kind")); }
text::PoolingMode RunConfig::pooling() const { return text::parse_pooling_mode(get("pooling")); }

std::string RunConfig::provider() const {
  auto p = get("provider");
  if (p != "stub" && p != "file") throw ValidationError("unknown provider '" + p + "' (expected stub or file)");
  return p;
}

std::string RunConfig::default_value(std::string_view key) const {
  static const std::map<std::string, std::string, std::less<>> fixed{
      {"seed", "42"},
      {"feature_kind", "f2"},
      {"provider", "stub"},
      {"pooling", "cls"},
      {"gate.fft_size", "2048"},
      {"gate.sensitivity", "1.5"},
      {"gate.reduction_db", "12"},
      {"gate.profile_ms", "500"},
      {"fusion.hidden1", "512"},
      {"fusion.hidden2", "128"},
      {"fusion.hidden3", "32"},
      {"fusion.dropout1", "0.3"},
      {"fusion.dropout2", "0.3"},
      {"fusion.l2", "1e-05"},
      {"fusion.threshold", "0.7"},
      {"fusion.lr", "0.0001"},
      {"fusion.decay", "0.99"},
      {"fusion.patience", "10"},
      {"fusion.batch", "32"},
      {"fusion.max_epochs", "200"},
  };
  if (auto it = fixed.find(key); it != fixed.end()) return it->second;

  const auto m = emotion::MtlConfig::defaults(feature_kind());
  const std::map<std::string, std::string, std::less<>> mtl{
      {"mtl.shared1", std::to_string(m.shared_layer_sizes[0])},
      {"mtl.shared2", std::to_string(m.shared_layer_sizes[1])},
      {"mtl.head_size", std::to_string(m.head_size)},
      {"mtl.dropout", io::format_double(m.dropout_rate)},
      {"mtl.alpha", io::format_double(m.weights.alpha)},
      {"mtl.beta", io::format_double(m.weights.beta)},
      {"mtl.gamma", io::format_double(m.weights.gamma)},
      {"mtl.lr", io::format_double(m.learning_rate)},
      {"mtl.decay", io::format_double(m.learning_decay)},
      {"mtl.l2", io::format_double(m.l2_coefficient)},
      {"mtl.batch", std::to_string(m.batch_size)},
      {"mtl.epochs", std::to_string(m.max_epochs)},
  };
  return mtl.at(std::string(key));
}

emotion::MtlConfig RunConfig::mtl_config() const {
  auto c = emotion::MtlConfig::defaults(feature_kind());
  c.shared_layer_sizes = {get_int("mtl.shared1"), get_int("mtl.shared2")};
  c.head_size = get_int("mtl.head_size");
  c.dropout_rate = get_double("mtl.dropout");
  c.weights = {get_double("mtl.alpha"), get_double("mtl.beta"), get_double("mtl.gamma")};
  c.learning_rate = get_double("mtl.lr");
  c.learning_decay = get_double("mtl.decay");
  c.l2_coefficient = get_double("mtl.l2");
  c.batch_size = get_int("mtl.batch");
  c.max_epochs = get_int("mtl.epochs");
  c.rng_seed = seed();
  c.validate();
  return c;
}

fusion::FusionConfig RunConfig::fusion_config() const {
  fusion::FusionConfig c;
  c.hidden_sizes = {get_int("fusion.hidden1"), get_int("fusion.hidden2"), get_int("fusion.hidden3")};
  c.dropout_rates = {get_double("fusion.dropout1"), get_double("fusion.dropout2")};
  c.l2_coefficient = get_double("fusion.l2");
  c.threshold = get_double("fusion.threshold");
  c.learning_rate = get_double("fusion.lr");
  c.learning_decay = get_double("fusion.decay");
  c.patience = get_int("fusion.patience");
  c.batch_size = get_int("fusion.batch");
  c.max_epochs = get_int("fusion.max_epochs");
  c.rng_seed = seed();
  c.validate();
  return c;
}

signal::GateSettings RunConfig::gate_settings() const {
  signal::GateSettings g;
  const int fft = get_int("gate.fft_size");
  if (fft < 4 || fft % 2) throw ValidationError("gate.fft_size must be even and >= 4");
  g.fft_size = static_cast<std::size_t>(fft);
  g.sensitivity = get_double("gate.sensitivity");
  g.reduction_db = get_double("gate.reduction_db");
  g.profile_ms = get_double("gate.profile_ms");
  return g;
}

std::string RunConfig::describe() const {
  std::vector<std::string> names;
  for (const auto& k : known_keys()) names.push_back(k.name);
  std::sort(names.begin(), names.end());
  std::ostringstream out;
  for (const auto& n : names) out << n << " = " << get(n) << "  (" << to_string(source_of(n)) << ")\n";
  return out.str();
}

}  // namespace mmhs::config
