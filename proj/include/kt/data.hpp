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

#ifndef KT_DATA_HPP
#define KT_DATA_HPP

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "kt/types.hpp"

namespace kt::data {

// One answered question: (question, KC set, response) at a chronological
// position within a student's log. kc_ids are dense, ascending, non-empty.
struct Interaction {
  std::int64_t order = 0;
  QuestionId question = 0;
  std::vector<KcId> kcs;
  std::uint8_t response = 0;
};

struct InteractionLog {
  std::string student;
  std::vector<Interaction> items;  // sorted by order, strictly increasing
};

// Raw identifier <-> dense index, assigned in first-appearance order.
class IdMap {
 public:
  std::int32_t intern(const std::string& raw);
  std::int32_t lookup(const std::string& raw) const;  // -1 if absent
  const std::string& raw(std::int32_t dense) const { return dense_to_raw_.at(static_cast<std::size_t>(dense)); }
  std::int32_t size() const { return static_cast<std::int32_t>(dense_to_raw_.size()); }

  bool operator==(const IdMap& other) const { return dense_to_raw_ == other.dense_to_raw_; }

 private:
  std::vector<std::string> dense_to_raw_;
  std::unordered_map<std::string, std::int32_t> raw_to_dense_;
};

// The one-to-many question -> KC-set map m. Entries are indexed by dense
// question id; each entry is a sorted, duplicate-free, non-empty KC list.
struct KcMapping {
  std::vector<std::vector<KcId>> entries;
  std::int32_t num_kcs = 0;  // kc universe is [0, num_kcs)

  const std::vector<KcId>& kcs_of(QuestionId q) const { return entries.at(static_cast<std::size_t>(q)); }
  std::int32_t num_questions() const { return static_cast<std::int32_t>(entries.size()); }
};

struct IngestReport {
  std::string source_kind;
  std::int64_t rows_read = 0;
  std::int64_t rows_kept = 0;
  std::int64_t dropped_missing_kc = 0;
  std::int64_t merged_multi_skill_rows = 0;
  std::int64_t kc_set_conflicts = 0;

  std::string to_json() const;
};

struct Dataset {
  std::vector<InteractionLog> logs;  // one per student, first-appearance order
  KcMapping mapping;
  IdMap question_ids;
  IdMap kc_ids;
  IngestReport report;
};

// Headline dataset attributes, computed over questions that appear in logs.
struct DatasetStats {
  std::int64_t num_questions = 0;
  std::int64_t num_kcs = 0;
  std::int64_t num_students = 0;
  std::int64_t num_kc_groups = 0;  // distinct KC sets across questions
  double avg_kcs_per_question = 0.0;

  std::string to_json() const;
  std::string to_text() const;  // avg rounded to 3 decimals
  bool operator==(const DatasetStats&) const = default;
};

struct Fold {
  std::vector<std::string> train_students;
  std::vector<std::string> validation_students;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> test_students;
  std::vector<Fold> folds;
};

enum class DatasetKind { assistments2009, canonical };

DatasetKind parse_dataset_kind(const std::string& name);

// Loaders. Both re-index question/KC ids to dense integers and return the
// id maps alongside the logs.
Dataset load_dataset(const std::string& path, DatasetKind kind);
Dataset load_canonical(const std::string& path);
Dataset load_assistments2009(const std::string& path);

// Replaces every KC c with two copies drawn from disjoint id ranges, so each
// question's KC set doubles and every KC gains a perfectly correlated twin.
Dataset corr_transform(const Dataset& dataset);

DatasetStats compute_stats(const std::vector<InteractionLog>& logs, const KcMapping& mapping);

SplitPlan split_dataset(const std::vector<InteractionLog>& logs, double test_fraction,
                        std::int32_t folds, std::uint64_t seed);

// Checks the SplitPlan invariants (disjointness, coverage) against the
// student population; throws on violation.
void validate_split_plan(const SplitPlan& plan, const std::vector<InteractionLog>& logs);

enum class CorrelationMode { independent, duplicated };

struct SyntheticSpec {
  std::int32_t num_students = 100;
  std::int32_t num_questions = 50;
  std::int32_t num_kcs = 10;
  std::int32_t kcs_per_question = 2;
  std::uint64_t seed = 0;
  CorrelationMode mode = CorrelationMode::independent;
  // Latent model slope; larger means more predictable responses.
  double discrimination = 1.4;
};

// Desk-scale stand-in for the public datasets: responses come from a
// per-(student, KC) latent proficiency model, so AUC above chance is
// learnable. In duplicated mode every KC carries a perfectly correlated twin.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Canonical on-disk format: UTF-8 CSV with header
// student_id,order,question_id,kc_ids,response and ";"-separated KC lists.
void write_canonical(const Dataset& dataset, const std::string& path);
void write_idmap(const IdMap& map, const std::string& path);
IdMap read_idmap(const std::string& path);

// Writes interactions.csv, questions.idmap, kcs.idmap, ingest_report.json
// under dir (created if missing).
void write_dataset_dir(const Dataset& dataset, const std::string& dir);
Dataset load_dataset_dir(const std::string& dir);

void write_split_plan(const SplitPlan& plan, const std::string& path);
SplitPlan read_split_plan(const std::string& path);

}  // namespace kt::data

#endif  // KT_DATA_HPP
