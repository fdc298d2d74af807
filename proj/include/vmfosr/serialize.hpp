// Copyright 2026 The vmfosr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON model checkpoints: schema-tagged, carrying the model config plus flat
// parameter arrays. Doubles survive the round trip bit-for-bit (shortest
// round-trip formatting on write, exact parse on read).

#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "vmfosr/errors.hpp"
#include "vmfosr/linalg.hpp"
#include "vmfosr/model.hpp"

namespace vmfosr::serialize {

using nlohmann::json;

inline constexpr const char* kCheckpointSchema = "vmfosr.checkpoint/1";

/// Reject keys outside the allowed set; missing keys are fine (defaults).
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  check_keys(j, {"rows", "cols", "data"}, where);
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<Vec>();
  if (data.size() != m.rows * m.cols)
    throw ConfigError(where + ": data length != rows*cols");
  m.data = data;
  return m;
}

inline json affine_to_json(const model::Affine& a) {
  return json{{"w", matrix_to_json(a.W)}, {"b", a.b}};
}

inline model::Affine affine_from_json(const json& j, const std::string& where) {
  check_keys(j, {"w", "b"}, where);
  model::Affine a;
  a.W = matrix_from_json(j.at("w"), where + ".w");
  a.b = j.at("b").get<Vec>();
  if (a.b.size() != a.W.rows) throw ConfigError(where + ": bias length != rows");
  return a;
}

inline std::string activation_name(model::Activation a) {
  return a == model::Activation::Tanh ? "tanh" : "relu";
}

inline model::Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return model::Activation::Tanh;
  if (name == "relu") return model::Activation::Relu;
  throw ConfigError("unknown activation '" + name + "'");
}

inline json model_config_to_json(const model::ModelConfig& cfg) {
  return json{{"input_dim", cfg.input_dim},
              {"hidden_layers", cfg.hidden_layers},
              {"d", cfg.d},
              {"p", cfg.p},
              {"n_classes", cfg.n_classes},
              {"activation", activation_name(cfg.activation)},
              {"tau", cfg.tau},
              {"classifier_hidden", cfg.classifier_hidden}};
}

inline model::ModelConfig model_config_from_json(const json& j,
                                                 const std::string& where) {
  check_keys(j,
             {"input_dim", "hidden_layers", "d", "p", "n_classes", "activation",
              "tau", "classifier_hidden"},
             where);
  model::ModelConfig cfg;
  if (j.contains("input_dim")) cfg.input_dim = j.at("input_dim").get<std::size_t>();
  if (j.contains("hidden_layers"))
    cfg.hidden_layers = j.at("hidden_layers").get<std::vector<std::size_t>>();
  if (j.contains("d")) cfg.d = j.at("d").get<std::size_t>();
  if (j.contains("p")) cfg.p = j.at("p").get<std::size_t>();
  if (j.contains("n_classes")) cfg.n_classes = j.at("n_classes").get<std::size_t>();
  if (j.contains("activation"))
    cfg.activation = activation_from_name(j.at("activation").get<std::string>());
  if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
  if (j.contains("classifier_hidden"))
    cfg.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
  return cfg;
}

inline json checkpoint_to_json(const model::ModelState& state) {
  json encoder = json::array();
  for (const auto& layer : state.encoder) encoder.push_back(affine_to_json(layer));
  json classifier = json::array();
  for (const auto& layer : state.classifier)
    classifier.push_back(affine_to_json(layer));
  return json{{"schema", kCheckpointSchema},
              {"config", model_config_to_json(state.config)},
              {"encoder", encoder},
              {"projection", affine_to_json(state.projection)},
              {"label_embeddings", matrix_to_json(state.label_embeddings)},
              {"classifier", classifier}};
}

inline model::ModelState checkpoint_from_json(const json& j) {
  check_keys(j,
             {"schema", "config", "encoder", "projection", "label_embeddings",
              "classifier"},
             "checkpoint");
  if (!j.contains("schema") || j.at("schema").get<std::string>() != kCheckpointSchema)
    throw ConfigError("checkpoint: missing or unsupported schema tag");
  model::ModelState state;
  state.config = model_config_from_json(j.at("config"), "checkpoint.config");
  state.config.validate();
  for (const auto& layer : j.at("encoder"))
    state.encoder.push_back(affine_from_json(layer, "checkpoint.encoder"));
  state.projection = affine_from_json(j.at("projection"), "checkpoint.projection");
  state.label_embeddings =
      matrix_from_json(j.at("label_embeddings"), "checkpoint.label_embeddings");
  for (const auto& layer : j.at("classifier"))
    state.classifier.push_back(affine_from_json(layer, "checkpoint.classifier"));
  if (state.label_embeddings.rows != state.config.n_classes ||
      state.label_embeddings.cols != state.config.p)
    throw ConfigError("checkpoint: label embedding shape disagrees with config");
  return state;
}

inline void save_checkpoint(const model::ModelState& state, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw IoError("save_checkpoint: cannot open " + path);
  file << checkpoint_to_json(state).dump(2) << '\n';
}

inline model::ModelState load_checkpoint(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("load_checkpoint: missing checkpoint " + path);
  json j;
  try {
    file >> j;
  } catch (const json::exception& e) {
    throw IoError("load_checkpoint: bad JSON in " + path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace vmfosr::serialize
