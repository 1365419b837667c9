#include "tabattn/artifact.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "tabattn/error.hpp"

namespace tabattn {
namespace {

using detail::json;
using detail::require;

json config_to_json(const TrainConfig& c) {
  return {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"adam_epsilon", c.adam_epsilon},
      {"val_fraction", c.val_fraction},
      {"seed", c.seed},
      {"clamp_epsilon", c.clamp_epsilon},
      {"patience", c.patience},
      {"model",
       {{"dim", c.model.dim},
        {"attn_dim", c.model.attn_dim},
        {"hidden", c.model.hidden},
        {"dropout", c.model.dropout},
        {"bn_momentum", c.model.bn_momentum},
        {"pooling", std::string(to_string(c.model.pooling))}}},
  };
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = require<std::size_t>(j, "epochs");
  c.batch_size = require<std::size_t>(j, "batch_size");
  c.learning_rate = require<double>(j, "learning_rate");
  c.beta1 = require<double>(j, "beta1");
  c.beta2 = require<double>(j, "beta2");
  c.adam_epsilon = require<double>(j, "adam_epsilon");
  c.val_fraction = require<double>(j, "val_fraction");
  c.seed = require<std::uint64_t>(j, "seed");
  c.clamp_epsilon = require<double>(j, "clamp_epsilon");
  c.patience = require<std::size_t>(j, "patience");
  const json& m = j.at("model");
  c.model.dim = require<std::size_t>(m, "dim");
  c.model.attn_dim = require<std::size_t>(m, "attn_dim");
  c.model.hidden = require<std::vector<std::size_t>>(m, "hidden");
  c.model.dropout = require<double>(m, "dropout");
  c.model.bn_momentum = require<double>(m, "bn_momentum");
  c.model.pooling = parse_pooling(require<std::string>(m, "pooling"));
  return c;
}

json dense_to_json(const DenseLayer& layer) {
  return {{"weight", detail::matrix_to_json(layer.weight)}, {"bias", layer.bias}};
}

json params_to_json(const ModelParams& p) {
  json embedders = json::array();
  for (std::size_t i = 0; i < p.embedders.size(); ++i) {
    json e = {{"feature", p.schema.feature(i).name}};
    if (const auto* table = std::get_if<EmbeddingTable>(&p.embedders[i])) {
      e["table"] = detail::matrix_to_json(table->weights);
    } else {
      const auto& num = std::get<NumericEmbedder>(p.embedders[i]);
      e["scale"] = num.scale;
      e["offset"] = num.offset;
    }
    embedders.push_back(std::move(e));
  }
  json hidden = json::array();
  for (std::size_t l = 0; l < p.head.hidden.size(); ++l) {
    json layer = dense_to_json(p.head.hidden[l]);
    const BatchNorm& bn = p.head.norms[l];
    layer["gamma"] = bn.gamma;
    layer["beta"] = bn.beta;
    layer["running_mean"] = bn.running_mean;
    layer["running_var"] = bn.running_var;
    hidden.push_back(std::move(layer));
  }
  return {
      {"embedders", std::move(embedders)},
      {"attention",
       {{"W", detail::matrix_to_json(p.attention.projection)},
        {"b", p.attention.bias},
        {"w", p.attention.context}}},
      {"head",
       {{"hidden", std::move(hidden)},
        {"output", dense_to_json(p.head.output)},
        {"dropout", p.head.dropout},
        {"momentum", p.head.momentum}}},
  };
}

void expect(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::Shape, "artifact shape inconsistency: " + what);
}

// Reads parameters and checks every tensor against the schema and config.
ModelParams params_from_json(const json& j, const FeatureSchema& schema, const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  const std::size_t k = config.attn_dim;
  ModelParams p;
  p.schema = schema;
  p.config = config;

  const json& embedders = j.at("embedders");
  expect(embedders.is_array() && embedders.size() == schema.size(), "embedder count");
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.feature(i);
    const json& e = embedders[i];
    expect(require<std::string>(e, "feature") == f.name, "embedder order at " + f.name);
    if (f.kind == FeatureKind::Numerical) {
      NumericEmbedder num{require<Vector>(e, "scale"), require<Vector>(e, "offset")};
      expect(num.scale.size() == d && num.offset.size() == d, "numeric embedder " + f.name);
      p.embedders.emplace_back(std::move(num));
    } else {
      EmbeddingTable table{detail::matrix_from_json(e.at("table"))};
      expect(table.weights.rows() == f.cardinality() && table.weights.cols() == d,
             "embedding table " + f.name);
      p.embedders.emplace_back(std::move(table));
    }
  }

  const json& att = j.at("attention");
  p.attention.projection = detail::matrix_from_json(att.at("W"));
  p.attention.bias = require<Vector>(att, "b");
  p.attention.context = require<Vector>(att, "w");
  expect(p.attention.projection.rows() == k && p.attention.projection.cols() == d, "attention W");
  expect(p.attention.bias.size() == k && p.attention.context.size() == k, "attention b/w");

  const json& head = j.at("head");
  const json& hidden = head.at("hidden");
  expect(hidden.is_array() && hidden.size() == config.hidden.size(), "hidden layer count");
  std::size_t width = d;
  for (std::size_t l = 0; l < config.hidden.size(); ++l) {
    const json& layer = hidden[l];
    const std::size_t h = config.hidden[l];
    DenseLayer dense{detail::matrix_from_json(layer.at("weight")), require<Vector>(layer, "bias")};
    expect(dense.weight.rows() == width && dense.weight.cols() == h && dense.bias.size() == h,
           "dense layer " + std::to_string(l));
    BatchNorm bn{require<Vector>(layer, "gamma"), require<Vector>(layer, "beta"),
                 require<Vector>(layer, "running_mean"), require<Vector>(layer, "running_var")};
    expect(bn.gamma.size() == h && bn.beta.size() == h && bn.running_mean.size() == h &&
               bn.running_var.size() == h,
           "batch norm " + std::to_string(l));
    for (double v : bn.running_var) expect(v >= 0.0, "negative running variance");
    p.head.hidden.push_back(std::move(dense));
    p.head.norms.push_back(std::move(bn));
    width = h;
  }
  const json& output = head.at("output");
  p.head.output = {detail::matrix_from_json(output.at("weight")), require<Vector>(output, "bias")};
  expect(p.head.output.weight.rows() == width && p.head.output.weight.cols() == 1 &&
             p.head.output.bias.size() == 1,
         "output layer");
  p.head.dropout = require<double>(head, "dropout");
  p.head.momentum = require<double>(head, "momentum");
  for (const auto& t : p.tensors()) expect(all_finite(t.values), "non-finite values in " + t.name);
  return p;
}

}  // namespace

std::string ModelArtifact::model_kind() const {
  if (std::holds_alternative<LogisticModel>(model)) return "logistic";
  return std::string(to_string(std::get<ModelParams>(model).config.pooling));
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

std::string artifact_to_json(const ModelArtifact& artifact) {
  json root = {
      {"format_version", artifact.format_version},
      {"created", artifact.created},
      {"model_kind", artifact.model_kind()},
      {"seed", artifact.config.seed},
      {"config", config_to_json(artifact.config)},
      {"schema", detail::schema_to_json(artifact.schema)},
      {"scaler", {{"mean", artifact.stats.mean}, {"stddev", artifact.stats.stddev}}},
  };
  if (const auto* params = std::get_if<ModelParams>(&artifact.model)) {
    root["params"] = params_to_json(*params);
  } else {
    const auto& lm = std::get<LogisticModel>(artifact.model);
    root["logistic"] = {{"weights", lm.weights}, {"bias", lm.bias.at(0)}};
  }
  return root.dump(1) + "\n";
}

ModelArtifact artifact_from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, std::string("artifact is not valid JSON (truncated?): ") + e.what());
  }
  if (!root.is_object()) fail(ErrorKind::Format, "artifact root must be an object");
  const int version = require<int>(root, "format_version");
  if (version != kArtifactFormatVersion) {
    fail(ErrorKind::Version, "unsupported artifact format version " + std::to_string(version) +
                                 " (expected " + std::to_string(kArtifactFormatVersion) + ")");
  }

  try {
    ModelArtifact a;
    a.format_version = version;
    a.created = require<std::string>(root, "created");
    a.config = config_from_json(root.at("config"));
    a.schema = detail::schema_from_json(root.at("schema"));
    const json& scaler = root.at("scaler");
    a.stats = {require<Vector>(scaler, "mean"), require<Vector>(scaler, "stddev")};
    const std::size_t n_num = a.schema.count(FeatureKind::Numerical);
    expect(a.stats.mean.size() == n_num && a.stats.stddev.size() == n_num, "scaler statistics");
    const auto kind = require<std::string>(root, "model_kind");
    if (kind == "logistic") {
      const json& lj = root.at("logistic");
      LogisticModel lm;
      lm.schema = a.schema;
      lm.weights = require<Vector>(lj, "weights");
      lm.bias = {require<double>(lj, "bias")};
      expect(lm.weights.size() == linear_feature_width(a.schema), "logistic weights");
      a.model = std::move(lm);
    } else {
      ModelParams p = params_from_json(root.at("params"), a.schema, a.config.model);
      expect(kind == to_string(p.config.pooling), "model kind vs pooling");
      a.model = std::move(p);
    }
    return a;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed artifact: ") + e.what());
  }
}

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write artifact " + path.string());
  out << artifact_to_json(artifact);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open artifact " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return artifact_from_json(buffer.str());
}

}  // namespace tabattn
