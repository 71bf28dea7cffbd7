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

#ifndef KT_EXPANSION_HPP
#define KT_EXPANSION_HPP

#include <string>
#include <utility>
#include <vector>

#include "kt/data.hpp"
#include "kt/types.hpp"

namespace kt::expand {

// Input labels on expanded steps. mask hides the response from the input
// stream; targets always carry the true response.
enum class Label : std::uint8_t { incorrect = 0, correct = 1, mask = 2 };

enum class LabelPolicy : std::uint8_t {
  ground_truth,  // input label = target at every step
  mask_last,     // input label = mask except at the last KC of each question
};

const char* label_policy_name(LabelPolicy policy);

struct ExpandedStep {
  QuestionId question = 0;
  KcId kc = 0;
  Label input_label = Label::incorrect;
  std::uint8_t target = 0;
  std::int32_t occurrence = 0;  // global question-occurrence index in the student's log
  std::int32_t group_index = 0;
  std::int32_t group_size = 1;

  bool last_in_group() const { return group_index == group_size - 1; }
};

// KC-level sequence for one student (or one window of one student).
// Steps of a question occurrence are contiguous and ordered by group_index.
struct ExpandedSequence {
  std::string student;
  std::vector<ExpandedStep> steps;
  std::int32_t question_count = 0;   // question occurrences covered
  std::int32_t first_occurrence = 0; // global index of the first covered occurrence

  std::int32_t length() const { return static_cast<std::int32_t>(steps.size()); }
};

struct WindowPlan {
  std::int32_t window_questions = 0;  // W, shared across models under comparison
  std::int32_t step_capacity = 0;     // W * max group size over the dataset
  LabelPolicy policy = LabelPolicy::ground_truth;
  QuestionId pad_question = 0;        // reserved pad ids (== number of real ids)
  KcId pad_kc = 0;
  std::vector<ExpandedSequence> windows;
};

// Expands one question-level log into its KC-level sequence under the given
// labeling policy. KCs of a question appear in ascending dense-id order.
ExpandedSequence expand(const data::InteractionLog& log, const data::KcMapping& mapping,
                        LabelPolicy policy);

// Splits a sequence into consecutive windows of at most window_questions
// question occurrences. Question groups never straddle a boundary; nothing
// is dropped or duplicated.
std::vector<ExpandedSequence> window(const ExpandedSequence& sequence, std::int32_t window_questions);

// expand + window over a whole dataset slice.
WindowPlan build_window_plan(const std::vector<data::InteractionLog>& logs,
                             const data::KcMapping& mapping, LabelPolicy policy,
                             std::int32_t window_questions);

// Padded view of a window: real steps followed by pad steps up to the plan's
// step capacity. Pad steps carry the reserved ids and never enter loss or
// metrics.
std::vector<ExpandedStep> padded_steps(const ExpandedSequence& window, const WindowPlan& plan);

inline bool is_pad(const ExpandedStep& step, const WindowPlan& plan) {
  return step.kc == plan.pad_kc;
}

// Collapses an expanded sequence back to its (question, response) sequence,
// one entry per occurrence.
std::vector<std::pair<QuestionId, std::uint8_t>> collapse_to_questions(const ExpandedSequence& seq);

struct FairnessReport {
  bool fair = true;
  std::vector<std::string> divergences;

  std::string to_text() const;
};

// True iff every plan evaluates the identical multiset of question
// occurrences under identical window placement. Divergent occurrences are
// listed in the report.
FairnessReport fairness_check(const std::vector<std::pair<std::string, const WindowPlan*>>& plans);

// Debug dump, one step per line; used by golden-file tests.
std::string dump_expanded(const ExpandedSequence& seq);

}  // namespace kt::expand

#endif  // KT_EXPANSION_HPP
