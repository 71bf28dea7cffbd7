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

#ifndef KT_MODEL_HPP
#define KT_MODEL_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kt/expansion.hpp"
#include "kt/params.hpp"
#include "kt/types.hpp"

namespace kt::model {

enum class ModelId : std::uint8_t { dkt, dkt_ml, dkt_ad, dkt_fuse, akt, akt_ml, akt_qm };

ModelId parse_model_id(const std::string& name);
const char* model_id_name(ModelId id);

inline bool is_ml_variant(ModelId id) { return id == ModelId::dkt_ml || id == ModelId::akt_ml; }
inline bool is_dkt_family(ModelId id) {
  return id == ModelId::dkt || id == ModelId::dkt_ml || id == ModelId::dkt_ad ||
         id == ModelId::dkt_fuse;
}
inline bool is_akt_family(ModelId id) { return !is_dkt_family(id); }
// The two classical baselines consume sibling responses; everything else is
// structurally prevented from doing so.
inline bool is_leakage_free(ModelId id) { return id != ModelId::dkt && id != ModelId::akt; }
inline expand::LabelPolicy native_policy(ModelId id) {
  return is_ml_variant(id) ? expand::LabelPolicy::mask_last : expand::LabelPolicy::ground_truth;
}
// dkt-fuse consumes question-level sequences; every other model consumes
// KC-expanded steps.
inline bool question_level(ModelId id) { return id == ModelId::dkt_fuse; }

struct ModelConfig {
  ModelId model_id = ModelId::dkt;
  std::int32_t d = 64;
  std::int32_t hidden = 64;
  std::int32_t attention_blocks = 2;
  std::int32_t attention_heads = 4;
  Scalar dropout = 0.2;
  std::uint64_t seed = 0;

  void validate() const;  // positive dimensions, heads divides hidden
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct StepPrediction {
  Scalar probability = 0.5;
  std::int32_t occurrence = 0;
  QuestionId question = 0;
  KcId kc = -1;  // -1 marks a question-level prediction
  std::int32_t group_index = 0;
  std::uint8_t target = 0;
};

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  const ModelConfig& config() const { return config_; }
  std::int32_t num_questions() const { return num_questions_; }
  std::int32_t num_kcs() const { return num_kcs_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  expand::LabelPolicy policy() const { return native_policy(config_.model_id); }
  bool leakage_free() const { return is_leakage_free(config_.model_id); }

  // Deterministic inference, no dropout. One prediction per expanded step;
  // dkt-fuse emits one per question occurrence (kc = -1).
  virtual std::vector<StepPrediction> forward(const expand::ExpandedSequence& window) const = 0;

  // Training pass over one window: forward with dropout drawn from rng, then
  // (if backprop) gradient accumulation scaled by grad_scale. Returns the sum
  // of per-step cross-entropies and the step count.
  virtual std::pair<Scalar, std::int64_t> accumulate(const expand::ExpandedSequence& window,
                                                     Rng& rng, Scalar grad_scale,
                                                     bool backprop) = 0;

  // Branch evaluation: each question occurrence is predicted KC by KC from
  // the history before the question, with sibling steps stripped of response
  // information. Adds the number of logical branches to *branches when given.
  virtual std::vector<StepPrediction> all_in_one(const expand::ExpandedSequence& window,
                                                 std::int64_t* branches) const = 0;

 protected:
  SequenceModel(ModelConfig config, std::int32_t num_questions, std::int32_t num_kcs);

  ModelConfig config_;
  std::int32_t num_questions_;
  std::int32_t num_kcs_;
  nn::ParamStore params_;
};

std::unique_ptr<SequenceModel> make_model(const ModelConfig& config, std::int32_t num_questions,
                                          std::int32_t num_kcs);

// e_c + g_label over a model's embedding tables. The mask label exists only
// on ML variants; asking elsewhere is a contract violation.
Vecd embed_kc_response(const nn::ParamStore& params, ModelId id, KcId c, expand::Label label);

// Difficulty-scaled embeddings: query side e_c + mu_q * d_c; value side
// e_(c,label) + mu_q * f_(c,label) when a label is given, else the query side.
std::pair<Vecd, Vecd> rasch_embed(const nn::ParamStore& params, ModelId id, QuestionId q, KcId c,
                                  std::optional<expand::Label> label);

}  // namespace kt::model

#endif  // KT_MODEL_HPP
