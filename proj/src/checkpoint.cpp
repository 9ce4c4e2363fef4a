// SPDX-License-Identifier: Apache-2.0
#include "uvtranse/checkpoint.hpp"

#include <algorithm>
#include <map>

#include "uvtranse/errors.hpp"

namespace uvt {

namespace {

Json array_json(const std::vector<std::size_t>& shape, std::span<const double> data) {
  Json j;
  j["shape"] = shape;
  Json values = Json::array();
  for (double v : data) values.push_back(v);
  j["data"] = std::move(values);
  return j;
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("checkpoint config is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("checkpoint config field '") + key + "': " + e.what());
  }
}

void read_array(const Json& j, const std::string& name, const std::vector<std::size_t>& shape,
                std::span<double> out) {
  const auto got = j.at("shape").get<std::vector<std::size_t>>();
  if (got != shape) throw ShapeError("checkpoint parameter " + name + " has the wrong shape");
  const Json& data = j.at("data");
  if (data.size() != out.size()) throw ShapeError("checkpoint parameter " + name + " has wrong size");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = data[i].get<double>();
}

}  // namespace

Json model_config_to_json(const ModelConfig& c) {
  const auto& v = c.visual;
  Json j;
  j["n_app"] = v.n_app;
  j["d_emb"] = v.d_emb;
  j["hidden_app"] = v.hidden_app;
  j["loc_hidden"] = v.loc_hidden;
  j["loc_dim"] = v.loc_dim;
  j["n_predicates"] = v.n_predicates;
  j["C"] = v.C;
  j["use_background"] = v.use_background;
  j["score_mode"] = to_string(v.score_mode);
  j["variant"] = to_string(v.combiner);
  j["use_location"] = v.use_location;
  j["head_hidden_relu"] = v.head_hidden_relu;
  j["n_classes"] = c.n_classes;
  j["use_language"] = c.use_language;
  j["word_dim"] = c.word_dim;
  j["gru_hidden"] = c.gru_hidden;
  j["lang_head_hidden"] = c.lang_head_hidden;
  j["alpha"] = c.alpha;
  j["lang_grad_to_visual"] = c.lang_grad_to_visual;
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  auto& v = c.visual;
  v.n_app = field<std::size_t>(j, "n_app");
  v.d_emb = field<std::size_t>(j, "d_emb");
  v.hidden_app = field<std::size_t>(j, "hidden_app");
  v.loc_hidden = field<std::size_t>(j, "loc_hidden");
  v.loc_dim = field<std::size_t>(j, "loc_dim");
  v.n_predicates = field<std::size_t>(j, "n_predicates");
  v.C = field<double>(j, "C");
  v.use_background = field<bool>(j, "use_background");
  v.score_mode = parse_score_mode(field<std::string>(j, "score_mode"));
  v.combiner = parse_combiner(field<std::string>(j, "variant"));
  v.use_location = field<bool>(j, "use_location");
  v.head_hidden_relu = field<bool>(j, "head_hidden_relu");
  c.n_classes = field<std::size_t>(j, "n_classes");
  c.use_language = field<bool>(j, "use_language");
  c.word_dim = field<std::size_t>(j, "word_dim");
  c.gru_hidden = field<std::size_t>(j, "gru_hidden");
  c.lang_head_hidden = field<std::size_t>(j, "lang_head_hidden");
  c.alpha = field<double>(j, "alpha");
  c.lang_grad_to_visual = field<bool>(j, "lang_grad_to_visual");
  c.validate();
  return c;
}

Json checkpoint_to_json(RelationModel& model) {
  Json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["config"] = model_config_to_json(model.config());
  Json params = Json::object();
  for (const auto& p : model.parameters()) params[p.name] = array_json(p.shape, p.value);
  doc["params"] = std::move(params);
  if (model.has_language()) {
    const auto& w = model.class_words();
    doc["class_words"] = array_json({w.rows(), w.cols()}, w.data());
  }
  return doc;
}

RelationModel checkpoint_from_json(const Json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
    throw ConfigError("not a uvtranse checkpoint");
  }
  if (doc.value("version", -1) != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version");
  }
  const ModelConfig config = model_config_from_json(doc.at("config"));
  Tensor2 words;
  if (config.use_language) {
    if (!doc.contains("class_words")) throw ConfigError("checkpoint lacks class_words");
    words = Tensor2(config.n_classes, config.word_dim);
    read_array(doc.at("class_words"), "class_words", {config.n_classes, config.word_dim},
               words.data());
  }
  RelationModel model(config, std::move(words), 0);
  const Json& params = doc.at("params");
  auto refs = model.parameters();
  if (params.size() != refs.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(params.size()) +
                      " parameter arrays, model expects " + std::to_string(refs.size()));
  }
  for (const auto& p : refs) {
    if (!params.contains(p.name)) throw ConfigError("checkpoint is missing parameter " + p.name);
    read_array(params.at(p.name), p.name, p.shape, p.value);
  }
  return model;
}

void save_checkpoint(RelationModel& model, const std::string& path) {
  write_canonical_file(path, checkpoint_to_json(model));
}

RelationModel load_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_json(read_json_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace uvt
