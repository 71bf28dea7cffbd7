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

#include <doctest.h>

#include <numeric>

#include "kt/data.hpp"
#include "kt/errors.hpp"
#include "kt/expansion.hpp"

using namespace kt::expand;
namespace data = kt::data;
using kt::Error;
using kt::KcId;
using kt::QuestionId;
using kt::Rng;

namespace {

data::KcMapping make_mapping(std::vector<std::vector<KcId>> entries) {
  data::KcMapping mapping;
  mapping.entries = std::move(entries);
  KcId max_kc = -1;
  for (const auto& entry : mapping.entries)
    for (KcId c : entry) max_kc = std::max(max_kc, c);
  mapping.num_kcs = max_kc + 1;
  return mapping;
}

data::InteractionLog make_log(const std::string& student,
                              std::vector<std::pair<QuestionId, std::uint8_t>> answers) {
  data::InteractionLog log;
  log.student = student;
  std::int64_t order = 0;
  for (auto [q, r] : answers) {
    data::Interaction item;
    item.order = order++;
    item.question = q;
    item.response = r;
    log.items.push_back(item);
  }
  return log;
}

}  // namespace

TEST_CASE("a three-KC question expands to one step per KC") {
  data::KcMapping mapping = make_mapping({{0, 1, 2}});
  data::InteractionLog log = make_log("s1", {{0, 1}});

  ExpandedSequence gt = expand(log, mapping, LabelPolicy::ground_truth);
  REQUIRE(gt.length() == 3);
  CHECK(gt.question_count == 1);
  for (std::int32_t g = 0; g < 3; ++g) {
    const ExpandedStep& step = gt.steps[static_cast<std::size_t>(g)];
    CHECK(step.question == 0);
    CHECK(step.kc == g);
    CHECK(step.input_label == Label::correct);
    CHECK(step.target == 1);
    CHECK(step.occurrence == 0);
    CHECK(step.group_index == g);
    CHECK(step.group_size == 3);
  }
  CHECK(gt.steps[2].last_in_group());
  CHECK_FALSE(gt.steps[0].last_in_group());

  ExpandedSequence ml = expand(log, mapping, LabelPolicy::mask_last);
  REQUIRE(ml.length() == 3);
  CHECK(ml.steps[0].input_label == Label::mask);
  CHECK(ml.steps[1].input_label == Label::mask);
  CHECK(ml.steps[2].input_label == Label::correct);
  for (const ExpandedStep& step : ml.steps) CHECK(step.target == 1);
}

TEST_CASE("masking respects the response value and single-KC questions") {
  data::KcMapping mapping = make_mapping({{0, 1}, {2}});
  data::InteractionLog log = make_log("s1", {{0, 0}, {1, 0}});

  ExpandedSequence ml = expand(log, mapping, LabelPolicy::mask_last);
  REQUIRE(ml.length() == 3);
  CHECK(ml.steps[0].input_label == Label::mask);
  CHECK(ml.steps[1].input_label == Label::incorrect);
  // A single-KC question is its own last step: no mask under either policy.
  CHECK(ml.steps[2].input_label == Label::incorrect);

  ExpandedSequence gt = expand(log, mapping, LabelPolicy::ground_truth);
  CHECK(gt.steps[2].input_label == ml.steps[2].input_label);
}

TEST_CASE("expand rejects unmapped questions") {
  data::KcMapping mapping = make_mapping({{0}});
  data::InteractionLog log = make_log("s1", {{3, 1}});
  CHECK_THROWS_WITH_AS(expand(log, mapping, LabelPolicy::ground_truth),
                       doctest::Contains("unmapped question"), Error);
}

TEST_CASE("collapse inverts expansion for every policy") {
  data::SyntheticSpec spec;
  spec.num_students = 8;
  spec.num_questions = 15;
  spec.num_kcs = 6;
  spec.kcs_per_question = 3;
  spec.seed = 13;
  data::Dataset ds = data::generate_synthetic(spec);
  for (auto policy : {LabelPolicy::ground_truth, LabelPolicy::mask_last}) {
    for (const data::InteractionLog& log : ds.logs) {
      ExpandedSequence seq = expand(log, ds.mapping, policy);
      auto collapsed = collapse_to_questions(seq);
      REQUIRE(collapsed.size() == log.items.size());
      for (std::size_t i = 0; i < collapsed.size(); ++i) {
        CHECK(collapsed[i].first == log.items[i].question);
        CHECK(collapsed[i].second == log.items[i].response);
      }
    }
  }
}

TEST_CASE("mask counts equal steps minus occurrences under mask_last") {
  data::SyntheticSpec spec;
  spec.num_students = 6;
  spec.num_questions = 12;
  spec.num_kcs = 7;
  spec.kcs_per_question = 4;
  spec.seed = 29;
  data::Dataset ds = data::generate_synthetic(spec);
  for (const data::InteractionLog& log : ds.logs) {
    ExpandedSequence ml = expand(log, ds.mapping, LabelPolicy::mask_last);
    ExpandedSequence gt = expand(log, ds.mapping, LabelPolicy::ground_truth);
    auto count_masks = [](const ExpandedSequence& seq) {
      std::int64_t n = 0;
      for (const ExpandedStep& step : seq.steps)
        if (step.input_label == Label::mask) ++n;
      return n;
    };
    CHECK(count_masks(gt) == 0);
    CHECK(count_masks(ml) == ml.length() - static_cast<std::int64_t>(log.items.size()));
    // Non-mask inputs agree with targets everywhere.
    for (const ExpandedStep& step : ml.steps)
      if (step.input_label != Label::mask)
        CHECK(static_cast<std::uint8_t>(step.input_label) == step.target);
  }
}

TEST_CASE("windowing splits by question count, keeping groups whole") {
  // Group sizes 2, 3, 1 with a budget of two questions per window.
  data::KcMapping mapping = make_mapping({{0, 1}, {2, 3, 4}, {5}});
  data::InteractionLog log = make_log("s1", {{0, 1}, {1, 0}, {2, 1}});
  ExpandedSequence seq = expand(log, mapping, LabelPolicy::ground_truth);
  REQUIRE(seq.length() == 6);

  std::vector<ExpandedSequence> wins = window(seq, 2);
  REQUIRE(wins.size() == 2);
  CHECK(wins[0].length() == 5);
  CHECK(wins[1].length() == 1);
  CHECK(wins[0].question_count == 2);
  CHECK(wins[1].question_count == 1);
  CHECK(wins[0].first_occurrence == 0);
  CHECK(wins[1].first_occurrence == 2);
  // The 3-KC group sits entirely in the first window.
  for (const ExpandedStep& step : wins[0].steps) CHECK(step.occurrence < 2);
  CHECK(wins[1].steps[0].question == 2);

  std::vector<ExpandedSequence> whole = window(seq, 10);
  REQUIRE(whole.size() == 1);
  CHECK(whole[0].length() == seq.length());

  std::vector<ExpandedSequence> singles = window(seq, 1);
  REQUIRE(singles.size() == 3);
  CHECK(singles[0].length() == 2);
  CHECK(singles[1].length() == 3);
  CHECK(singles[2].length() == 1);

  CHECK_THROWS_AS(window(seq, 0), Error);
}

TEST_CASE("windows partition the sequence exactly") {
  data::SyntheticSpec spec;
  spec.num_students = 5;
  spec.num_questions = 23;
  spec.num_kcs = 9;
  spec.kcs_per_question = 3;
  spec.seed = 31;
  data::Dataset ds = data::generate_synthetic(spec);
  Rng rng(7);
  for (const data::InteractionLog& log : ds.logs) {
    ExpandedSequence seq = expand(log, ds.mapping, LabelPolicy::mask_last);
    std::int32_t w = 1 + static_cast<std::int32_t>(rng.index(8));
    std::vector<ExpandedSequence> wins = window(seq, w);
    std::vector<ExpandedStep> joined;
    std::int32_t questions = 0;
    for (const ExpandedSequence& win : wins) {
      CHECK(win.question_count <= w);
      CHECK(win.question_count >= 1);
      CHECK(win.first_occurrence == win.steps.front().occurrence);
      questions += win.question_count;
      joined.insert(joined.end(), win.steps.begin(), win.steps.end());
    }
    CHECK(questions == seq.question_count);
    REQUIRE(joined.size() == seq.steps.size());
    for (std::size_t i = 0; i < joined.size(); ++i) {
      CHECK(joined[i].question == seq.steps[i].question);
      CHECK(joined[i].kc == seq.steps[i].kc);
      CHECK(joined[i].input_label == seq.steps[i].input_label);
      CHECK(joined[i].occurrence == seq.steps[i].occurrence);
    }
    // Every window except possibly the last uses its full budget.
    for (std::size_t k = 0; k + 1 < wins.size(); ++k) CHECK(wins[k].question_count == w);
  }
}

TEST_CASE("window plans reserve pad ids and size their capacity by the largest group") {
  data::KcMapping mapping = make_mapping({{0, 1}, {2, 3, 4}, {5}});
  std::vector<data::InteractionLog> logs = {make_log("s1", {{0, 1}, {1, 0}, {2, 1}}),
                                            make_log("s2", {{2, 0}})};
  WindowPlan plan = build_window_plan(logs, mapping, LabelPolicy::ground_truth, 2);
  CHECK(plan.pad_question == 3);
  CHECK(plan.pad_kc == 6);
  CHECK(plan.step_capacity == 2 * 3);
  REQUIRE(plan.windows.size() == 3);
  CHECK(plan.windows[0].student == "s1");
  CHECK(plan.windows[2].student == "s2");

  std::vector<ExpandedStep> padded = padded_steps(plan.windows[0], plan);
  REQUIRE(padded.size() == 6);
  CHECK_FALSE(is_pad(padded[4], plan));
  CHECK(is_pad(padded[5], plan));
  CHECK(padded[5].question == plan.pad_question);
  CHECK(padded[5].occurrence == -1);

  std::vector<ExpandedStep> pad_only = padded_steps(plan.windows[2], plan);
  CHECK(pad_only.size() == 6);
  CHECK_FALSE(is_pad(pad_only[0], plan));
  for (std::size_t i = 1; i < pad_only.size(); ++i) CHECK(is_pad(pad_only[i], plan));

  ExpandedSequence too_long;
  too_long.steps.resize(7);
  CHECK_THROWS_AS(padded_steps(too_long, plan), Error);
}

TEST_CASE("fairness_check accepts identical coverage and flags window mismatches") {
  data::SyntheticSpec spec;
  spec.num_students = 4;
  spec.num_questions = 30;
  spec.num_kcs = 5;
  spec.kcs_per_question = 2;
  spec.seed = 17;
  data::Dataset ds = data::generate_synthetic(spec);

  WindowPlan a = build_window_plan(ds.logs, ds.mapping, LabelPolicy::ground_truth, 20);
  WindowPlan b = build_window_plan(ds.logs, ds.mapping, LabelPolicy::mask_last, 20);
  FairnessReport same = fairness_check({{"baseline", &a}, {"masked", &b}});
  CHECK(same.fair);
  CHECK(same.divergences.empty());
  CHECK(same.to_text().find("fair true") != std::string::npos);

  // A 30-question history splits at 20 under one plan and at 15 under the
  // other; the shared occurrences land in different windows.
  WindowPlan c = build_window_plan(ds.logs, ds.mapping, LabelPolicy::ground_truth, 15);
  FairnessReport mixed = fairness_check({{"w20", &a}, {"w15", &c}});
  CHECK_FALSE(mixed.fair);
  REQUIRE_FALSE(mixed.divergences.empty());
  CHECK(mixed.divergences[0].find("W=") != std::string::npos);
  CHECK(mixed.to_text().find("fair false") != std::string::npos);

  // Same budget, different population: occurrences present on one side only.
  std::vector<data::InteractionLog> fewer(ds.logs.begin(), ds.logs.end() - 1);
  WindowPlan d = build_window_plan(fewer, ds.mapping, LabelPolicy::ground_truth, 20);
  FairnessReport missing = fairness_check({{"all", &a}, {"fewer", &d}});
  CHECK_FALSE(missing.fair);
  CHECK_FALSE(missing.divergences.empty());

  FairnessReport solo = fairness_check({{"only", &a}});
  CHECK(solo.fair);
}

TEST_CASE("expanded dump is stable") {
  data::KcMapping mapping = make_mapping({{0, 1, 2}, {3}});
  data::InteractionLog log = make_log("s1", {{0, 1}, {1, 0}});
  ExpandedSequence seq = expand(log, mapping, LabelPolicy::mask_last);
  const std::string expected =
      "# ktlab-expdump v1\n"
      "# student question kc label target group_index group_size last\n"
      "s1 0 0 M 1 0 3 0\n"
      "s1 0 1 M 1 1 3 0\n"
      "s1 0 2 1 1 2 3 1\n"
      "s1 1 3 0 0 0 1 1\n";
  CHECK(dump_expanded(seq) == expected);
}
