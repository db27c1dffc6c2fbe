#include "mmhs/checkpoint.hpp"

#include <charconv>
#include <map>

#include <json.hpp>

#include "mmhs/csv.hpp"
#include "mmhs/errors.hpp"

namespace mmhs::io {
namespace {

using Json = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;

// Nearest double to the shortest decimal form of f, so 0.7f reads back as 0.7.
double widen(float f) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, f).ptr;
  double d = 0.0;
  std::from_chars(buf, end, d);
  return d;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(static_cast<float>(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Seq>
Json vector_json(const Seq& v) {
  Json out = Json::array();
  for (const auto x : v) out.push_back(static_cast<float>(x));
  return out;
}

Json layers_json(std::span<const nn::DenseLayer> layers, Json& doc) {
  Json sizes = Json::array();
  Json acts = Json::array();
  Json params = Json::array();
  for (const auto& l : layers) {
    sizes.push_back(Json::array({l.in_dim(), l.out_dim()}));
    acts.push_back(std::string(nn::to_string(l.activation)));
    params.push_back(Json{{"weights", matrix_json(l.weights)}, {"biases", vector_json(l.biases)}});
  }
  doc["layer_sizes"] = sizes;
  doc["activations"] = acts;
  return params;
}

class Reader {
 public:
  Reader(std::string_view text, std::string source) : source_(std::move(source)) {
    try {
      doc_ = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(source_ + ": invalid JSON: " + e.what());
    }
    if (!doc_.is_object()) throw FormatError(source_ + ": checkpoint must be a JSON object");
  }

  const Json& doc() const { return doc_; }

  const Json& field(const Json& obj, const char* name) const {
    if (!obj.is_object() || !obj.contains(name)) throw SchemaError(source_ + ": missing field '" + name + "'");
    return obj.at(name);
  }

  double real(const Json& obj, const char* name) const {
    const auto& v = field(obj, name);
    if (!v.is_number()) throw SchemaError(source_ + ": field '" + std::string(name) + "' must be a number");
    return v.is_number_float() ? widen(v.get<float>()) : static_cast<double>(v.get<std::int64_t>());
  }

  std::int64_t integer(const Json& obj, const char* name) const {
    const auto& v = field(obj, name);
    if (!v.is_number_integer()) throw SchemaError(source_ + ": field '" + std::string(name) + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::vector<double> vec(const Json& v, const std::string& what) const {
    if (!v.is_array()) throw SchemaError(source_ + ": " + what + " must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) throw SchemaError(source_ + ": " + what + " must hold numbers");
      out.push_back(static_cast<double>(x.get<float>()));
    }
    return out;
  }

  void check_kind(const char* kind) const {
    const auto version = integer(doc_, "format_version");
    if (version != kCheckpointVersion)
      throw FormatError(source_ + ": unsupported checkpoint format_version " + std::to_string(version));
    const auto& k = field(doc_, "model_kind");
    if (!k.is_string() || k.get<std::string>() != kind)
      throw FormatError(source_ + ": expected model_kind '" + kind + "'");
  }

  // `chain` requires each layer to consume the previous layer's output.
  std::vector<nn::DenseLayer> layers(bool chain) const {
    const auto& sizes = field(doc_, "layer_sizes");
    const auto& acts = field(doc_, "activations");
    const auto& params = field(doc_, "layers");
    if (!sizes.is_array() || !acts.is_array() || !params.is_array() || params.size() != acts.size() ||
        sizes.size() != params.size())
      throw SchemaError(source_ + ": layer_sizes, activations and layers disagree");
    std::vector<nn::DenseLayer> out;
    for (std::size_t i = 0; i < params.size(); ++i) {
      nn::DenseLayer l;
      l.activation = nn::parse_activation(acts[i].get<std::string>());
      const auto& w = field(params[i], "weights");
      const auto b = vec(field(params[i], "biases"), "biases");
      if (!w.is_array() || w.empty()) throw SchemaError(source_ + ": weights of layer " + std::to_string(i) + " empty");
      const auto rows = static_cast<Eigen::Index>(w.size());
      const auto cols = static_cast<Eigen::Index>(w[0].size());
      l.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = vec(w[static_cast<std::size_t>(r)], "weights");
        if (static_cast<Eigen::Index>(row.size()) != cols)
          throw SchemaError(source_ + ": ragged weight matrix in layer " + std::to_string(i));
        for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = row[static_cast<std::size_t>(c)];
      }
      if (static_cast<Eigen::Index>(b.size()) != rows)
        throw SchemaError(source_ + ": bias length mismatch in layer " + std::to_string(i));
      l.biases = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
      if (!sizes[i].is_array() || sizes[i].size() != 2 || sizes[i][0].get<std::int64_t>() != cols ||
          sizes[i][1].get<std::int64_t>() != rows)
        throw SchemaError(source_ + ": layer_sizes do not match layer " + std::to_string(i));
      if (chain && i > 0 && out.back().out_dim() != cols)
        throw SchemaError(source_ + ": layer " + std::to_string(i) + " input does not match previous output");
      out.push_back(std::move(l));
    }
    return out;
  }

 private:
  Json doc_;
  std::string source_;
};

}  // namespace

std::string mtl_checkpoint_json(const emotion::MtlModel& model) {
  const auto& c = model.config();
  Json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["model_kind"] = "mtl";
  Json params = layers_json(model.layers(), doc);
  doc["scaler"] = Json{{"min", vector_json(model.scaler().min())}, {"max", vector_json(model.scaler().max())}};
  doc["hyperparameters"] = Json{
      {"feature_kind", std::string(features::to_string(c.kind))},
      {"shared_layer_sizes", Json::array({c.shared_layer_sizes[0], c.shared_layer_sizes[1]})},
      {"head_size", c.head_size},
      {"dropout_rate", static_cast<float>(c.dropout_rate)},
      {"alpha", static_cast<float>(c.weights.alpha)},
      {"beta", static_cast<float>(c.weights.beta)},
      {"gamma", static_cast<float>(c.weights.gamma)},
      {"learning_rate", static_cast<float>(c.learning_rate)},
      {"learning_decay", static_cast<float>(c.learning_decay)},
      {"l2_coefficient", static_cast<float>(c.l2_coefficient)},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"rng_seed", c.rng_seed},
  };
  doc["layers"] = std::move(params);
  return doc.dump(1) + "\n";
}

emotion::MtlModel parse_mtl_checkpoint(std::string_view json, const std::string& source) {
  Reader r(json, source);
  r.check_kind("mtl");
  const auto& h = r.field(r.doc(), "hyperparameters");
  emotion::MtlConfig c;
  c.kind = features::parse_representation_kind(r.field(h, "feature_kind").get<std::string>());
  const auto& shared = r.field(h, "shared_layer_sizes");
  if (!shared.is_array() || shared.size() != 2) throw SchemaError(source + ": shared_layer_sizes must have 2 entries");
  c.shared_layer_sizes = {shared[0].get<int>(), shared[1].get<int>()};
  c.head_size = static_cast<int>(r.integer(h, "head_size"));
  c.dropout_rate = r.real(h, "dropout_rate");
  c.weights = {r.real(h, "alpha"), r.real(h, "beta"), r.real(h, "gamma")};
  c.learning_rate = r.real(h, "learning_rate");
  c.learning_decay = r.real(h, "learning_decay");
  c.l2_coefficient = r.real(h, "l2_coefficient");
  c.batch_size = static_cast<int>(r.integer(h, "batch_size"));
  c.max_epochs = static_cast<int>(r.integer(h, "max_epochs"));
  c.rng_seed = r.field(h, "rng_seed").get<std::uint64_t>();
  auto layers = r.layers(false);
  if (!layers.empty()) c.input_dim = static_cast<int>(layers.front().in_dim());
  const auto& scaler = r.field(r.doc(), "scaler");
  features::FeatureScaler s(r.vec(r.field(scaler, "min"), "scaler.min"), r.vec(r.field(scaler, "max"), "scaler.max"));
  if (!layers.empty() && static_cast<Eigen::Index>(s.size()) != layers.front().in_dim())
    throw SchemaError(source + ": scaler length does not match model input");
  return emotion::MtlModel(c, std::move(s), std::move(layers));
}

std::string fusion_checkpoint_json(const fusion::FusionModel& model) {
  const auto& c = model.config();
  Json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["model_kind"] = "fusion";
  Json params = layers_json(model.layers(), doc);
  doc["scaler"] = Json{{"min", Json::array()}, {"max", Json::array()}};
  doc["hyperparameters"] = Json{
      {"hidden_sizes", Json::array({c.hidden_sizes[0], c.hidden_sizes[1], c.hidden_sizes[2]})},
      {"dropout_rates", vector_json(c.dropout_rates)},
      {"l2_coefficient", static_cast<float>(c.l2_coefficient)},
      {"threshold", static_cast<float>(c.threshold)},
      {"learning_rate", static_cast<float>(c.learning_rate)},
      {"learning_decay", static_cast<float>(c.learning_decay)},
      {"patience", c.patience},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"rng_seed", c.rng_seed},
  };
  doc["layers"] = std::move(params);
  return doc.dump(1) + "\n";
}

fusion::FusionModel parse_fusion_checkpoint(std::string_view json, const std::string& source) {
  Reader r(json, source);
  r.check_kind("fusion");
  const auto& h = r.field(r.doc(), "hyperparameters");
  fusion::FusionConfig c;
  const auto& hidden = r.field(h, "hidden_sizes");
  const auto& drop = r.field(h, "dropout_rates");
  if (!hidden.is_array() || hidden.size() != 3 || !drop.is_array() || drop.size() != 2)
    throw SchemaError(source + ": hidden_sizes needs 3 entries and dropout_rates 2");
  c.hidden_sizes = {hidden[0].get<int>(), hidden[1].get<int>(), hidden[2].get<int>()};
  c.dropout_rates = {widen(drop[0].get<float>()), widen(drop[1].get<float>())};
  c.l2_coefficient = r.real(h, "l2_coefficient");
  c.threshold = r.real(h, "threshold");
  c.learning_rate = r.real(h, "learning_rate");
  c.learning_decay = r.real(h, "learning_decay");
  c.patience = static_cast<int>(r.integer(h, "patience"));
  c.batch_size = static_cast<int>(r.integer(h, "batch_size"));
  c.max_epochs = static_cast<int>(r.integer(h, "max_epochs"));
  c.rng_seed = r.field(h, "rng_seed").get<std::uint64_t>();
  auto layers = r.layers(true);
  if (!layers.empty()) c.input_dim = static_cast<int>(layers.front().in_dim());
  c.validate();
  return fusion::FusionModel(c, std::move(layers));
}

void save_checkpoint(const std::filesystem::path& path, const emotion::MtlModel& model) {
  write_text_file(path, mtl_checkpoint_json(model));
}

void save_checkpoint(const std::filesystem::path& path, const fusion::FusionModel& model) {
  write_text_file(path, fusion_checkpoint_json(model));
}

emotion::MtlModel load_mtl_checkpoint(const std::filesystem::path& path) {
  return parse_mtl_checkpoint(read_text_file(path), path.string());
}

fusion::FusionModel load_fusion_checkpoint(const std::filesystem::path& path) {
  return parse_fusion_checkpoint(read_text_file(path), path.string());
}

std::string checkpoint_kind(const std::filesystem::path& path) {
  Reader r(read_text_file(path), path.string());
  const auto& k = r.field(r.doc(), "model_kind");
  if (!k.is_string()) throw SchemaError(path.string() + ": model_kind must be a string");
  return k.get<std::string>();
}

}  // namespace mmhs::io
