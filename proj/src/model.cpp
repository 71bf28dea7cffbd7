//
// Copyright 2026 The ktlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "kt/model.hpp"

#include "kt/errors.hpp"
#include "model_detail.hpp"

namespace kt::model {

namespace {
constexpr const char* kModelNames[] = {"dkt",     "dkt-ml", "dkt-ad", "dkt-fuse",
                                       "akt",     "akt-ml", "akt-qm"};
}

ModelId parse_model_id(const std::string& name) {
  for (std::size_t i = 0; i < std::size(kModelNames); ++i)
    if (name == kModelNames[i]) return static_cast<ModelId>(i);
  throw Error::usage("unknown model '" + name +
                     "' (expected one of dkt, dkt-ml, dkt-ad, dkt-fuse, akt, akt-ml, akt-qm)");
}

const char* model_id_name(ModelId id) { return kModelNames[static_cast<std::size_t>(id)]; }

void ModelConfig::validate() const {
  if (d < 1 || hidden < 1) throw Error::usage("model dimensions must be positive");
  if (is_akt_family(model_id)) {
    if (attention_blocks < 1 || attention_heads < 1)
      throw Error::usage("attention blocks and heads must be positive");
    if (hidden % attention_heads != 0)
      throw Error::usage("attention heads must divide the hidden width");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw Error::usage("dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"model", model_id_name(model_id)},
          {"d", d},
          {"hidden", hidden},
          {"attention_blocks", attention_blocks},
          {"attention_heads", attention_heads},
          {"dropout", dropout},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig config;
  config.model_id = parse_model_id(j.at("model").get<std::string>());
  config.d = j.value("d", config.d);
  config.hidden = j.value("hidden", config.hidden);
  config.attention_blocks = j.value("attention_blocks", config.attention_blocks);
  config.attention_heads = j.value("attention_heads", config.attention_heads);
  config.dropout = j.value("dropout", config.dropout);
  config.seed = j.value("seed", config.seed);
  config.validate();
  return config;
}

SequenceModel::SequenceModel(ModelConfig config, std::int32_t num_questions, std::int32_t num_kcs)
    : config_(std::move(config)), num_questions_(num_questions), num_kcs_(num_kcs) {
  config_.validate();
  if (num_questions_ < 1 || num_kcs_ < 1)
    throw Error::data("model needs at least one question and one KC");
}

std::unique_ptr<SequenceModel> make_model(const ModelConfig& config, std::int32_t num_questions,
                                          std::int32_t num_kcs) {
  if (is_dkt_family(config.model_id)) return detail::make_dkt(config, num_questions, num_kcs);
  return detail::make_akt(config, num_questions, num_kcs);
}

Vecd embed_kc_response(const nn::ParamStore& params, ModelId id, KcId c, expand::Label label) {
  if (label == expand::Label::mask && !is_ml_variant(id))
    throw Error::data(std::string("mask label requested on ") + model_id_name(id) +
                      ", which has no mask embedding");
  const Matd& kc = params.value("embed.kc");
  if (c < 0 || c >= kc.cols()) throw Error::data("kc id out of range");
  const char* g = label == expand::Label::mask ? "embed.gmask"
                  : label == expand::Label::correct ? "embed.g1"
                                                    : "embed.g0";
  return kc.col(c) + params.value(g).col(0);
}

std::pair<Vecd, Vecd> rasch_embed(const nn::ParamStore& params, ModelId id, QuestionId q, KcId c,
                                  std::optional<expand::Label> label) {
  if (!is_akt_family(id))
    throw Error::data(std::string(model_id_name(id)) + " has no difficulty embeddings");
  const Matd& kc = params.value("embed.kc");
  const Matd& mu = params.value("embed.mu");
  if (c < 0 || c >= kc.cols()) throw Error::data("kc id out of range");
  if (q < 0 || q >= mu.cols()) throw Error::data("question id out of range");
  Scalar difficulty = mu(0, q);
  Vecd query = kc.col(c) + difficulty * params.value("embed.dvar").col(c);
  if (!label) return {query, query};
  const char* f = *label == expand::Label::mask ? "embed.fmask"
                  : *label == expand::Label::correct ? "embed.f1"
                                                     : "embed.f0";
  if (*label == expand::Label::mask && !params.has("embed.fmask"))
    throw Error::data(std::string("mask label requested on ") + model_id_name(id) +
                      ", which has no mask embedding");
  Vecd value = embed_kc_response(params, id, c, *label) + difficulty * params.value(f).col(c);
  return {query, value};
}

}  // namespace kt::model
