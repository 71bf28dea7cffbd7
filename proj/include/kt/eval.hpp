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

#ifndef KT_EVAL_HPP
#define KT_EVAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kt/expansion.hpp"
#include "kt/model.hpp"
#include "kt/types.hpp"

namespace kt::eval {

enum class TraceLevel : std::uint8_t { kc_step, question };
enum class EvalMethod : std::uint8_t { one_by_one, all_in_one, aggregated_one_by_one };

const char* trace_level_name(TraceLevel level);
const char* eval_method_name(EvalMethod method);
EvalMethod parse_eval_method(const std::string& name);

struct TraceEntry {
  std::string student;
  std::int32_t occurrence = 0;
  QuestionId question = 0;
  KcId kc = -1;  // -1 marks a question-level entry
  std::int32_t group_index = 0;
  std::int32_t group_size = 1;
  Scalar probability = 0.5;
  std::uint8_t target = 0;
};

struct PredictionTrace {
  TraceLevel level = TraceLevel::kc_step;
  std::vector<TraceEntry> entries;
};

struct EvalReport {
  EvalMethod method = EvalMethod::one_by_one;
  TraceLevel level = TraceLevel::kc_step;
  double auc = 0.0;
  double accuracy = 0.0;
  std::int64_t population = 0;

  std::string to_json() const;
};

// Perturbation audit: responses are flipped one question occurrence at a
// time; max_shift is the largest prediction change seen on a flipped
// occurrence's own steps.
struct LeakageReport {
  Scalar max_shift = 0.0;
  std::int64_t sampled_occurrences = 0;

  bool leak_free() const { return max_shift <= 1e-6; }
  const char* verdict() const { return leak_free() ? "leak_free" : "leaking"; }
  std::string to_json() const;
};

// One forward pass per window; one entry per expanded step (per question
// occurrence for models that predict at question level).
PredictionTrace eval_one_by_one(const model::SequenceModel& model,
                                const std::vector<expand::ExpandedSequence>& windows);

// Means KC-step probabilities into one entry per question occurrence.
// Question-level traces pass through unchanged. A group with missing steps
// is an error.
PredictionTrace aggregate_by_question(const PredictionTrace& trace);

// Branch evaluation: every occurrence is predicted KC by KC from the history
// before it, sibling responses withheld, then mean-aggregated to question
// level. Adds the number of forward branches to *branches when given.
PredictionTrace eval_all_in_one(const model::SequenceModel& model,
                                const std::vector<expand::ExpandedSequence>& windows,
                                std::int64_t* branches = nullptr);

// Rank-based AUC with the 0.5 tie convention; needs both classes.
double auc(const std::vector<Scalar>& probabilities, const std::vector<std::uint8_t>& targets);

double accuracy(const std::vector<Scalar>& probabilities, const std::vector<std::uint8_t>& targets,
                double threshold = 0.5);

EvalReport summarize(const PredictionTrace& trace, EvalMethod method);

// Flips sampled multi-KC occurrences in the model's input representation and
// measures the prediction shift on their own steps.
LeakageReport leakage_probe(const model::SequenceModel& model,
                            const std::vector<expand::ExpandedSequence>& windows,
                            std::int64_t samples, std::uint64_t seed);

// Line-oriented trace files, versioned header, whitespace-delimited columns.
void write_trace(const PredictionTrace& trace, const std::string& path);
PredictionTrace read_trace(const std::string& path);

}  // namespace kt::eval

#endif  // KT_EVAL_HPP
