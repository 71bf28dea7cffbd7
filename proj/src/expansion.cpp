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

#include "kt/expansion.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "kt/errors.hpp"

namespace kt::expand {

const char* label_policy_name(LabelPolicy policy) {
  return policy == LabelPolicy::ground_truth ? "ground_truth" : "mask_last";
}

ExpandedSequence expand(const data::InteractionLog& log, const data::KcMapping& mapping,
                        LabelPolicy policy) {
  ExpandedSequence seq;
  seq.student = log.student;
  seq.question_count = static_cast<std::int32_t>(log.items.size());
  for (std::size_t i = 0; i < log.items.size(); ++i) {
    const data::Interaction& item = log.items[i];
    if (item.question < 0 || item.question >= mapping.num_questions() ||
        mapping.kcs_of(item.question).empty())
      throw Error::data("expand: student '" + log.student + "' references unmapped question " +
                        std::to_string(item.question));
    const std::vector<KcId>& kcs = mapping.kcs_of(item.question);
    std::int32_t group_size = static_cast<std::int32_t>(kcs.size());
    for (std::int32_t g = 0; g < group_size; ++g) {
      ExpandedStep step;
      step.question = item.question;
      step.kc = kcs[static_cast<std::size_t>(g)];
      step.target = item.response;
      step.occurrence = static_cast<std::int32_t>(i);
      step.group_index = g;
      step.group_size = group_size;
      bool last = g == group_size - 1;
      if (policy == LabelPolicy::ground_truth || last)
        step.input_label = item.response ? Label::correct : Label::incorrect;
      else
        step.input_label = Label::mask;
      seq.steps.push_back(step);
    }
  }
  return seq;
}

std::vector<ExpandedSequence> window(const ExpandedSequence& sequence,
                                     std::int32_t window_questions) {
  if (window_questions < 1) throw Error::data("window: budget must be >= 1");
  std::vector<ExpandedSequence> out;
  std::size_t cursor = 0;
  while (cursor < sequence.steps.size()) {
    ExpandedSequence win;
    win.student = sequence.student;
    win.first_occurrence = sequence.steps[cursor].occurrence;
    std::int32_t taken = 0;
    while (cursor < sequence.steps.size() && taken < window_questions) {
      std::int32_t occ = sequence.steps[cursor].occurrence;
      while (cursor < sequence.steps.size() && sequence.steps[cursor].occurrence == occ)
        win.steps.push_back(sequence.steps[cursor++]);
      ++taken;
    }
    win.question_count = taken;
    out.push_back(std::move(win));
  }
  return out;
}

WindowPlan build_window_plan(const std::vector<data::InteractionLog>& logs,
                             const data::KcMapping& mapping, LabelPolicy policy,
                             std::int32_t window_questions) {
  WindowPlan plan;
  plan.window_questions = window_questions;
  plan.policy = policy;
  plan.pad_question = mapping.num_questions();
  plan.pad_kc = mapping.num_kcs;
  std::int32_t max_group = 1;
  for (const auto& entry : mapping.entries)
    max_group = std::max(max_group, static_cast<std::int32_t>(entry.size()));
  plan.step_capacity = window_questions * max_group;
  for (const data::InteractionLog& log : logs) {
    if (log.items.empty()) continue;
    for (ExpandedSequence& win : window(expand(log, mapping, policy), window_questions))
      plan.windows.push_back(std::move(win));
  }
  return plan;
}

std::vector<ExpandedStep> padded_steps(const ExpandedSequence& win, const WindowPlan& plan) {
  if (win.length() > plan.step_capacity)
    throw Error::data("padded_steps: window exceeds the plan's step capacity");
  std::vector<ExpandedStep> out = win.steps;
  ExpandedStep pad;
  pad.question = plan.pad_question;
  pad.kc = plan.pad_kc;
  pad.input_label = Label::incorrect;
  pad.target = 0;
  pad.occurrence = -1;
  pad.group_index = 0;
  pad.group_size = 1;
  out.resize(static_cast<std::size_t>(plan.step_capacity), pad);
  return out;
}

std::vector<std::pair<QuestionId, std::uint8_t>> collapse_to_questions(
    const ExpandedSequence& seq) {
  std::vector<std::pair<QuestionId, std::uint8_t>> out;
  for (const ExpandedStep& step : seq.steps)
    if (step.group_index == 0) out.emplace_back(step.question, step.target);
  return out;
}

std::string FairnessReport::to_text() const {
  std::ostringstream out;
  out << "# ktlab-fairness v1\n";
  out << "fair " << (fair ? "true" : "false") << "\n";
  for (const std::string& d : divergences) out << "divergence " << d << "\n";
  return out.str();
}

FairnessReport fairness_check(
    const std::vector<std::pair<std::string, const WindowPlan*>>& plans) {
  FairnessReport report;
  if (plans.size() < 2) return report;

  // Evaluation target identity: the question occurrence plus its window
  // placement. Two plans that cover the same occurrences but slice them into
  // different windows evaluate them under different histories.
  using Target = std::tuple<std::string, std::int32_t, std::int32_t>;  // student, occurrence, window start
  auto targets_of = [](const WindowPlan& plan) {
    std::map<Target, std::int64_t> multiset;
    for (const ExpandedSequence& win : plan.windows)
      for (const ExpandedStep& step : win.steps)
        if (step.group_index == 0)
          multiset[{win.student, step.occurrence, win.first_occurrence}]++;
    return multiset;
  };

  const auto reference = targets_of(*plans[0].second);
  for (std::size_t i = 1; i < plans.size(); ++i) {
    if (plans[i].second->window_questions != plans[0].second->window_questions) {
      report.fair = false;
      report.divergences.push_back("plan '" + plans[i].first + "' uses W=" +
                                   std::to_string(plans[i].second->window_questions) +
                                   " but plan '" + plans[0].first + "' uses W=" +
                                   std::to_string(plans[0].second->window_questions));
    }
    auto other = targets_of(*plans[i].second);
    if (other == reference) continue;
    report.fair = false;
    for (const auto& [target, count] : reference) {
      auto it = other.find(target);
      if (it == other.end() || it->second != count)
        report.divergences.push_back(
            "student " + std::get<0>(target) + " occurrence " +
            std::to_string(std::get<1>(target)) + " (window start " +
            std::to_string(std::get<2>(target)) + ") differs between '" + plans[0].first +
            "' and '" + plans[i].first + "'");
    }
    for (const auto& [target, count] : other) {
      if (!reference.count(target))
        report.divergences.push_back(
            "student " + std::get<0>(target) + " occurrence " +
            std::to_string(std::get<1>(target)) + " (window start " +
            std::to_string(std::get<2>(target)) + ") only in '" + plans[i].first + "'");
    }
  }
  return report;
}

std::string dump_expanded(const ExpandedSequence& seq) {
  std::ostringstream out;
  out << "# ktlab-expdump v1\n";
  out << "# student question kc label target group_index group_size last\n";
  for (const ExpandedStep& step : seq.steps) {
    char label = step.input_label == Label::mask ? 'M' : (step.input_label == Label::correct ? '1' : '0');
    out << seq.student << ' ' << step.question << ' ' << step.kc << ' ' << label << ' '
        << static_cast<int>(step.target) << ' ' << step.group_index << ' ' << step.group_size
        << ' ' << (step.last_in_group() ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace kt::expand
