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

#include "kt/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kt/errors.hpp"

namespace kt::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::int32_t IdMap::intern(const std::string& raw) {
  auto it = raw_to_dense_.find(raw);
  if (it != raw_to_dense_.end()) return it->second;
  std::int32_t dense = static_cast<std::int32_t>(dense_to_raw_.size());
  dense_to_raw_.push_back(raw);
  raw_to_dense_.emplace(raw, dense);
  return dense;
}

std::int32_t IdMap::lookup(const std::string& raw) const {
  auto it = raw_to_dense_.find(raw);
  return it == raw_to_dense_.end() ? -1 : it->second;
}

std::string IngestReport::to_json() const {
  json j;
  j["version"] = 1;
  j["source_kind"] = source_kind;
  j["rows_read"] = rows_read;
  j["rows_kept"] = rows_kept;
  j["dropped_missing_kc"] = dropped_missing_kc;
  j["merged_multi_skill_rows"] = merged_multi_skill_rows;
  j["kc_set_conflicts"] = kc_set_conflicts;
  return j.dump(2);
}

std::string DatasetStats::to_json() const {
  json j;
  j["num_questions"] = num_questions;
  j["num_kcs"] = num_kcs;
  j["num_students"] = num_students;
  j["num_kc_groups"] = num_kc_groups;
  j["avg_kcs_per_question"] = avg_kcs_per_question;
  return j.dump(2);
}

std::string DatasetStats::to_text() const {
  std::ostringstream out;
  out << "questions " << num_questions << "\n"
      << "kcs " << num_kcs << "\n"
      << "students " << num_students << "\n"
      << "kc_groups " << num_kc_groups << "\n"
      << "avg_kcs_per_question " << std::fixed << std::setprecision(3)
      << avg_kcs_per_question << "\n";
  return out.str();
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "assistments2009") return DatasetKind::assistments2009;
  if (name == "canonical") return DatasetKind::canonical;
  throw Error::usage("unknown dataset kind '" + name + "'");
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// RFC 4180-style field splitting; ASSISTments exports quote fields that
// contain commas.
std::vector<std::string> split_csv_quoted(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::int64_t parse_int(const std::string& s, std::int64_t row, const char* what) {
  try {
    std::size_t used = 0;
    std::int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error::data("row " + std::to_string(row) + ": cannot parse " + what + " '" + s + "'");
  }
}

struct RawRow {
  std::string student;
  std::int64_t order;
  std::string question;
  std::vector<std::string> kcs;
  std::uint8_t response;
};

// Shared tail of both loaders: dense re-indexing, per-student grouping,
// order sorting, mapping construction and validation.
Dataset assemble(std::vector<RawRow> rows, IngestReport report, bool rerank_orders) {
  if (rows.empty()) throw Error::data("empty dataset: no usable interaction rows");

  Dataset ds;
  ds.report = std::move(report);

  std::unordered_map<std::string, std::size_t> log_index;
  for (RawRow& row : rows) {
    Interaction item;
    item.order = row.order;
    item.question = ds.question_ids.intern(row.question);
    item.response = row.response;
    std::set<KcId> kc_set;
    for (const std::string& raw_kc : row.kcs) kc_set.insert(ds.kc_ids.intern(raw_kc));
    item.kcs.assign(kc_set.begin(), kc_set.end());

    auto it = log_index.find(row.student);
    if (it == log_index.end()) {
      log_index.emplace(row.student, ds.logs.size());
      ds.logs.push_back(InteractionLog{row.student, {}});
      it = log_index.find(row.student);
    }
    ds.logs[it->second].items.push_back(std::move(item));
  }

  for (InteractionLog& log : ds.logs) {
    std::stable_sort(log.items.begin(), log.items.end(),
                     [](const Interaction& a, const Interaction& b) { return a.order < b.order; });
    if (rerank_orders) {
      for (std::size_t i = 0; i < log.items.size(); ++i)
        log.items[i].order = static_cast<std::int64_t>(i);
    } else {
      for (std::size_t i = 1; i < log.items.size(); ++i) {
        if (log.items[i].order == log.items[i - 1].order)
          throw Error::data("student '" + log.student + "': duplicated order " +
                            std::to_string(log.items[i].order));
      }
    }
  }

  ds.mapping.num_kcs = ds.kc_ids.size();
  ds.mapping.entries.assign(static_cast<std::size_t>(ds.question_ids.size()), {});
  for (InteractionLog& log : ds.logs) {
    for (Interaction& item : log.items) {
      auto& entry = ds.mapping.entries[static_cast<std::size_t>(item.question)];
      if (entry.empty()) {
        entry = item.kcs;
      } else if (entry != item.kcs) {
        // Multi-skill exports occasionally tag the same problem with
        // different sets; merge and normalize the interactions afterwards.
        std::set<KcId> merged(entry.begin(), entry.end());
        merged.insert(item.kcs.begin(), item.kcs.end());
        entry.assign(merged.begin(), merged.end());
        ds.report.kc_set_conflicts++;
      }
    }
  }
  for (InteractionLog& log : ds.logs)
    for (Interaction& item : log.items)
      item.kcs = ds.mapping.entries[static_cast<std::size_t>(item.question)];

  return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path, DatasetKind kind) {
  switch (kind) {
    case DatasetKind::canonical: return load_canonical(path);
    case DatasetKind::assistments2009: return load_assistments2009(path);
  }
  throw Error::usage("unhandled dataset kind");
}

Dataset load_canonical(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open '" + path + "'");

  IngestReport report;
  report.source_kind = "canonical";

  std::string line;
  if (!std::getline(in, line)) throw Error::data("empty dataset: '" + path + "' has no header");
  if (strip(line) != "student_id,order,question_id,kc_ids,response")
    throw Error::data("'" + path + "': unexpected canonical header '" + strip(line) + "'");

  std::vector<RawRow> rows;
  std::set<std::pair<std::string, std::int64_t>> seen_orders;
  std::int64_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (strip(line).empty()) continue;
    report.rows_read++;
    std::vector<std::string> fields = split(strip(line), ',');
    if (fields.size() != 5)
      throw Error::data("row " + std::to_string(row_number) + ": expected 5 fields, got " +
                        std::to_string(fields.size()));
    RawRow row;
    row.student = fields[0];
    row.order = parse_int(fields[1], row_number, "order");
    row.question = fields[2];
    std::int64_t response = parse_int(fields[4], row_number, "response");
    if (response != 0 && response != 1)
      throw Error::data("row " + std::to_string(row_number) + ": response must be 0 or 1");
    row.response = static_cast<std::uint8_t>(response);
    for (const std::string& kc : split(fields[3], ';'))
      if (!strip(kc).empty()) row.kcs.push_back(strip(kc));
    if (row.kcs.empty()) {
      report.dropped_missing_kc++;
      continue;
    }
    if (!seen_orders.emplace(row.student, row.order).second)
      throw Error::data("row " + std::to_string(row_number) + ": duplicated (student, order) pair (" +
                        row.student + ", " + std::to_string(row.order) + ")");
    report.rows_kept++;
    rows.push_back(std::move(row));
  }
  return assemble(std::move(rows), std::move(report), /*rerank_orders=*/false);
}

Dataset load_assistments2009(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open '" + path + "'");

  IngestReport report;
  report.source_kind = "assistments2009";

  std::string line;
  if (!std::getline(in, line)) throw Error::data("empty dataset: '" + path + "' has no header");
  std::vector<std::string> header = split_csv_quoted(strip(line));
  auto column = [&](const std::string& name) -> std::int64_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (strip(header[i]) == name) return static_cast<std::int64_t>(i);
    return -1;
  };
  std::int64_t col_user = column("user_id");
  std::int64_t col_order = column("order_id");
  std::int64_t col_problem = column("problem_id");
  std::int64_t col_skill = column("skill_id");
  std::int64_t col_correct = column("correct");
  if (col_user < 0 || col_order < 0 || col_problem < 0 || col_skill < 0 || col_correct < 0)
    throw Error::data("'" + path + "': missing required ASSISTments columns "
                      "(user_id, order_id, problem_id, skill_id, correct)");

  // Multi-skill problems appear as one row per skill sharing (user, order,
  // problem); collapse them into a single interaction with the union.
  std::map<std::tuple<std::string, std::int64_t, std::string>, RawRow> merged;
  std::int64_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (strip(line).empty()) continue;
    report.rows_read++;
    std::vector<std::string> fields = split_csv_quoted(line);
    auto field = [&](std::int64_t idx) -> std::string {
      return idx < static_cast<std::int64_t>(fields.size()) ? strip(fields[static_cast<std::size_t>(idx)]) : "";
    };
    std::string skill = field(col_skill);
    if (skill.empty()) {
      report.dropped_missing_kc++;
      continue;
    }
    std::string student = field(col_user);
    std::string problem = field(col_problem);
    if (student.empty() || problem.empty())
      throw Error::data("row " + std::to_string(row_number) + ": missing user_id or problem_id");
    std::int64_t order = parse_int(field(col_order), row_number, "order_id");
    std::int64_t correct = parse_int(field(col_correct), row_number, "correct");
    if (correct != 0 && correct != 1)
      throw Error::data("row " + std::to_string(row_number) + ": correct must be 0 or 1");

    auto key = std::make_tuple(student, order, problem);
    auto it = merged.find(key);
    if (it == merged.end()) {
      RawRow row;
      row.student = student;
      row.order = order;
      row.question = problem;
      row.kcs.push_back(skill);
      row.response = static_cast<std::uint8_t>(correct);
      merged.emplace(key, std::move(row));
      report.rows_kept++;
    } else {
      if (std::find(it->second.kcs.begin(), it->second.kcs.end(), skill) == it->second.kcs.end())
        it->second.kcs.push_back(skill);
      report.merged_multi_skill_rows++;
    }
  }

  std::vector<RawRow> rows;
  rows.reserve(merged.size());
  for (auto& [key, row] : merged) rows.push_back(std::move(row));
  // Orders are re-ranked per student: order_id values are globally unique row
  // ids, and merging can leave gaps.
  return assemble(std::move(rows), std::move(report), /*rerank_orders=*/true);
}

Dataset corr_transform(const Dataset& dataset) {
  Dataset out;
  out.report = dataset.report;
  out.question_ids = dataset.question_ids;

  std::int32_t k = dataset.mapping.num_kcs;
  for (std::int32_t c = 0; c < k; ++c) out.kc_ids.intern(dataset.kc_ids.raw(c) + "#1");
  for (std::int32_t c = 0; c < k; ++c) out.kc_ids.intern(dataset.kc_ids.raw(c) + "#2");

  auto doubled = [k](const std::vector<KcId>& kcs) {
    std::vector<KcId> twice;
    twice.reserve(kcs.size() * 2);
    for (KcId c : kcs) twice.push_back(c);
    for (KcId c : kcs) twice.push_back(c + k);
    return twice;  // already ascending: originals < k <= twins
  };

  out.mapping.num_kcs = 2 * k;
  out.mapping.entries.reserve(dataset.mapping.entries.size());
  for (const auto& entry : dataset.mapping.entries) out.mapping.entries.push_back(doubled(entry));

  out.logs.reserve(dataset.logs.size());
  for (const InteractionLog& log : dataset.logs) {
    InteractionLog copy;
    copy.student = log.student;
    copy.items.reserve(log.items.size());
    for (const Interaction& item : log.items) {
      Interaction t = item;
      t.kcs = doubled(item.kcs);
      copy.items.push_back(std::move(t));
    }
    out.logs.push_back(std::move(copy));
  }
  return out;
}

DatasetStats compute_stats(const std::vector<InteractionLog>& logs, const KcMapping& mapping) {
  DatasetStats stats;
  std::set<QuestionId> questions;
  std::int64_t students_with_items = 0;
  for (const InteractionLog& log : logs) {
    if (!log.items.empty()) ++students_with_items;
    for (const Interaction& item : log.items) questions.insert(item.question);
  }
  if (questions.empty()) throw Error::data("compute_stats: empty logs");

  std::set<KcId> kcs;
  std::set<std::vector<KcId>> groups;
  double kc_total = 0.0;
  for (QuestionId q : questions) {
    const std::vector<KcId>& entry = mapping.kcs_of(q);
    kcs.insert(entry.begin(), entry.end());
    groups.insert(entry);
    kc_total += static_cast<double>(entry.size());
  }
  stats.num_questions = static_cast<std::int64_t>(questions.size());
  stats.num_kcs = static_cast<std::int64_t>(kcs.size());
  stats.num_students = students_with_items;
  stats.num_kc_groups = static_cast<std::int64_t>(groups.size());
  stats.avg_kcs_per_question = kc_total / static_cast<double>(questions.size());
  return stats;
}

SplitPlan split_dataset(const std::vector<InteractionLog>& logs, double test_fraction,
                        std::int32_t folds, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error::data("split_dataset: test_fraction must be in (0, 1)");
  if (folds < 2) throw Error::data("split_dataset: folds must be >= 2");
  std::int64_t n = static_cast<std::int64_t>(logs.size());
  if (n < folds + 1)
    throw Error::data("split_dataset: need at least folds+1 students, got " + std::to_string(n));

  std::vector<std::string> students;
  students.reserve(logs.size());
  for (const InteractionLog& log : logs) students.push_back(log.student);

  Rng rng(seed);
  shuffle(students, rng);

  std::int64_t test_count = std::llround(static_cast<double>(n) * test_fraction);
  test_count = std::max<std::int64_t>(1, std::min(test_count, n - 1));
  std::int64_t remaining = n - test_count;
  if (remaining < folds)
    throw Error::data("split_dataset: insufficient population after test holdout (" +
                      std::to_string(remaining) + " students for " + std::to_string(folds) +
                      " folds)");

  SplitPlan plan;
  plan.seed = seed;
  plan.test_students.assign(students.begin(), students.begin() + test_count);
  std::vector<std::string> rest(students.begin() + test_count, students.end());

  plan.folds.resize(static_cast<std::size_t>(folds));
  for (std::int64_t i = 0; i < remaining; ++i) {
    std::size_t fold = static_cast<std::size_t>(i % folds);
    plan.folds[fold].validation_students.push_back(rest[static_cast<std::size_t>(i)]);
  }
  for (std::int32_t f = 0; f < folds; ++f) {
    const auto& val = plan.folds[static_cast<std::size_t>(f)].validation_students;
    std::set<std::string> val_set(val.begin(), val.end());
    for (const std::string& s : rest)
      if (!val_set.count(s)) plan.folds[static_cast<std::size_t>(f)].train_students.push_back(s);
  }
  return plan;
}

void validate_split_plan(const SplitPlan& plan, const std::vector<InteractionLog>& logs) {
  std::set<std::string> population;
  for (const InteractionLog& log : logs) population.insert(log.student);
  std::set<std::string> test(plan.test_students.begin(), plan.test_students.end());
  for (const std::string& s : test)
    if (!population.count(s)) throw Error::data("split plan: unknown test student '" + s + "'");

  std::set<std::string> non_test;
  for (const std::string& s : population)
    if (!test.count(s)) non_test.insert(s);

  std::set<std::string> val_union;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const Fold& fold = plan.folds[f];
    std::set<std::string> train(fold.train_students.begin(), fold.train_students.end());
    std::set<std::string> val(fold.validation_students.begin(), fold.validation_students.end());
    for (const std::string& s : val) {
      if (test.count(s)) throw Error::data("split plan: test student in fold validation");
      if (train.count(s)) throw Error::data("split plan: student in both train and validation");
      if (!val_union.insert(s).second)
        throw Error::data("split plan: student '" + s + "' in validation of two folds");
    }
    for (const std::string& s : train)
      if (test.count(s)) throw Error::data("split plan: test student in fold train");
    std::set<std::string> fold_union = train;
    fold_union.insert(val.begin(), val.end());
    if (fold_union != non_test)
      throw Error::data("split plan: fold " + std::to_string(f) +
                        " does not cover the non-test population");
  }
  if (val_union != non_test)
    throw Error::data("split plan: fold validation sets do not partition the non-test population");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_students <= 0 || spec.num_questions <= 0 || spec.num_kcs <= 0)
    throw Error::data("generate_synthetic: counts must be positive");
  if (spec.kcs_per_question < 1)
    throw Error::data("generate_synthetic: kcs_per_question must be >= 1");
  if (spec.kcs_per_question > spec.num_kcs)
    throw Error::data("generate_synthetic: kcs_per_question exceeds num_kcs");

  Rng rng(spec.seed);
  Dataset ds;
  ds.report.source_kind = "synthetic";

  auto pad_number = [](std::int32_t v, int width) {
    std::ostringstream out;
    out << std::setw(width) << std::setfill('0') << v;
    return out.str();
  };

  for (std::int32_t s = 0; s < spec.num_students; ++s)
    ds.logs.push_back(InteractionLog{"s" + pad_number(s, 5), {}});
  for (std::int32_t q = 0; q < spec.num_questions; ++q)
    ds.question_ids.intern("q" + pad_number(q, 5));
  for (std::int32_t c = 0; c < spec.num_kcs; ++c) ds.kc_ids.intern("c" + pad_number(c, 4));
  if (spec.mode == CorrelationMode::duplicated)
    for (std::int32_t c = 0; c < spec.num_kcs; ++c) ds.kc_ids.intern("c" + pad_number(c, 4) + "_dup");

  // Base KC difficulties; duplicated twins share their base difficulty.
  std::vector<double> kc_difficulty(static_cast<std::size_t>(spec.num_kcs));
  for (double& d : kc_difficulty) d = rng.normal();

  ds.mapping.num_kcs =
      spec.mode == CorrelationMode::duplicated ? 2 * spec.num_kcs : spec.num_kcs;
  std::vector<double> question_difficulty(static_cast<std::size_t>(spec.num_questions));
  std::vector<std::int32_t> kc_pool(static_cast<std::size_t>(spec.num_kcs));
  for (std::int32_t q = 0; q < spec.num_questions; ++q) {
    for (std::int32_t c = 0; c < spec.num_kcs; ++c) kc_pool[static_cast<std::size_t>(c)] = c;
    // Partial Fisher-Yates: first kcs_per_question entries become the sample.
    for (std::int32_t i = 0; i < spec.kcs_per_question; ++i) {
      std::int64_t j = i + rng.index(spec.num_kcs - i);
      std::swap(kc_pool[static_cast<std::size_t>(i)], kc_pool[static_cast<std::size_t>(j)]);
    }
    std::vector<KcId> base(kc_pool.begin(), kc_pool.begin() + spec.kcs_per_question);
    std::sort(base.begin(), base.end());
    double difficulty = 0.0;
    for (KcId c : base) difficulty += kc_difficulty[static_cast<std::size_t>(c)];
    question_difficulty[static_cast<std::size_t>(q)] = difficulty / static_cast<double>(base.size());

    std::vector<KcId> entry;
    if (spec.mode == CorrelationMode::duplicated) {
      entry.reserve(base.size() * 2);
      for (KcId c : base) entry.push_back(c);
      for (KcId c : base) entry.push_back(c + spec.num_kcs);
    } else {
      entry = base;
    }
    ds.mapping.entries.push_back(std::move(entry));
  }

  std::vector<QuestionId> question_order(static_cast<std::size_t>(spec.num_questions));
  for (std::int32_t s = 0; s < spec.num_students; ++s) {
    double ability = rng.normal();
    for (std::int32_t q = 0; q < spec.num_questions; ++q) question_order[static_cast<std::size_t>(q)] = q;
    shuffle(question_order, rng);
    InteractionLog& log = ds.logs[static_cast<std::size_t>(s)];
    log.items.reserve(question_order.size());
    for (std::size_t t = 0; t < question_order.size(); ++t) {
      QuestionId q = question_order[t];
      double logit = spec.discrimination * (ability - question_difficulty[static_cast<std::size_t>(q)]);
      double p = 1.0 / (1.0 + std::exp(-logit));
      Interaction item;
      item.order = static_cast<std::int64_t>(t);
      item.question = q;
      item.kcs = ds.mapping.entries[static_cast<std::size_t>(q)];
      item.response = rng.bernoulli(p) ? 1 : 0;
      log.items.push_back(std::move(item));
    }
  }
  ds.report.rows_read = static_cast<std::int64_t>(spec.num_students) * spec.num_questions;
  ds.report.rows_kept = ds.report.rows_read;
  return ds;
}

void write_canonical(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error::io("cannot write '" + path + "'");
  out << "student_id,order,question_id,kc_ids,response\n";
  for (const InteractionLog& log : dataset.logs) {
    for (const Interaction& item : log.items) {
      out << log.student << ',' << item.order << ','
          << dataset.question_ids.raw(item.question) << ',';
      for (std::size_t i = 0; i < item.kcs.size(); ++i) {
        if (i) out << ';';
        out << dataset.kc_ids.raw(item.kcs[i]);
      }
      out << ',' << static_cast<int>(item.response) << '\n';
    }
  }
  if (!out) throw Error::io("short write to '" + path + "'");
}

void write_idmap(const IdMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error::io("cannot write '" + path + "'");
  out << "# ktlab-idmap v1\n";
  for (std::int32_t i = 0; i < map.size(); ++i) out << map.raw(i) << '\t' << i << '\n';
  if (!out) throw Error::io("short write to '" + path + "'");
}

IdMap read_idmap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open '" + path + "'");
  IdMap map;
  std::string line;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error::data("idmap '" + path + "' row " + std::to_string(row) + ": missing tab");
    std::string raw = line.substr(0, tab);
    std::int64_t dense = parse_int(strip(line.substr(tab + 1)), row, "dense id");
    std::int32_t assigned = map.intern(raw);
    if (assigned != dense)
      throw Error::data("idmap '" + path + "' row " + std::to_string(row) +
                        ": dense ids out of order");
  }
  return map;
}

void write_dataset_dir(const Dataset& dataset, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error::io("cannot create directory '" + dir + "': " + ec.message());
  write_canonical(dataset, (fs::path(dir) / "interactions.csv").string());
  write_idmap(dataset.question_ids, (fs::path(dir) / "questions.idmap").string());
  write_idmap(dataset.kc_ids, (fs::path(dir) / "kcs.idmap").string());
  std::ofstream report((fs::path(dir) / "ingest_report.json").string(), std::ios::trunc);
  if (!report) throw Error::io("cannot write ingest report under '" + dir + "'");
  report << dataset.report.to_json() << '\n';
}

namespace {

// Dense ids in a freshly parsed CSV follow first appearance; the stored map
// is the authority. Returns old dense id -> stored dense id.
std::vector<std::int32_t> remap_table(const IdMap& parsed, const IdMap& stored,
                                      const std::string& what, const std::string& dir) {
  std::vector<std::int32_t> table(static_cast<std::size_t>(parsed.size()));
  for (std::int32_t i = 0; i < parsed.size(); ++i) {
    std::int32_t mapped = stored.lookup(parsed.raw(i));
    if (mapped < 0)
      throw Error::data("'" + dir + "': " + what + ".idmap is missing id '" + parsed.raw(i) +
                        "' used by interactions.csv");
    table[static_cast<std::size_t>(i)] = mapped;
  }
  return table;
}

}  // namespace

Dataset load_dataset_dir(const std::string& dir) {
  fs::path csv = fs::path(dir) / "interactions.csv";
  if (!fs::exists(csv)) throw Error::io("no interactions.csv under '" + dir + "'");
  Dataset ds = load_canonical(csv.string());
  fs::path qmap = fs::path(dir) / "questions.idmap";
  fs::path cmap = fs::path(dir) / "kcs.idmap";
  if (!fs::exists(qmap) && !fs::exists(cmap)) return ds;
  if (!fs::exists(qmap) || !fs::exists(cmap))
    throw Error::data("'" + dir + "': idmaps must come in pairs");

  IdMap stored_q = read_idmap(qmap.string());
  IdMap stored_c = read_idmap(cmap.string());
  std::vector<std::int32_t> q_table = remap_table(ds.question_ids, stored_q, "questions", dir);
  std::vector<std::int32_t> c_table = remap_table(ds.kc_ids, stored_c, "kcs", dir);

  KcMapping mapping;
  mapping.entries.resize(static_cast<std::size_t>(stored_q.size()));
  mapping.num_kcs = stored_c.size();
  for (QuestionId q = 0; q < ds.mapping.num_questions(); ++q) {
    std::vector<KcId> kcs = ds.mapping.kcs_of(q);
    for (KcId& c : kcs) c = c_table[static_cast<std::size_t>(c)];
    std::sort(kcs.begin(), kcs.end());
    mapping.entries[static_cast<std::size_t>(q_table[static_cast<std::size_t>(q)])] =
        std::move(kcs);
  }
  for (InteractionLog& log : ds.logs) {
    for (Interaction& item : log.items) {
      item.question = q_table[static_cast<std::size_t>(item.question)];
      item.kcs = mapping.kcs_of(item.question);
    }
  }
  ds.mapping = std::move(mapping);
  ds.question_ids = std::move(stored_q);
  ds.kc_ids = std::move(stored_c);
  return ds;
}

void write_split_plan(const SplitPlan& plan, const std::string& path) {
  auto check_id = [](const std::string& s) {
    if (s.empty() || s.find_first_of(" \t\n") != std::string::npos)
      throw Error::data("split plan: student id '" + s + "' not serializable");
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error::io("cannot write '" + path + "'");
  out << "# ktlab-split v1\n";
  out << "seed " << plan.seed << '\n';
  out << "test";
  for (const std::string& s : plan.test_students) {
    check_id(s);
    out << ' ' << s;
  }
  out << '\n';
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    out << "fold " << f << " train";
    for (const std::string& s : plan.folds[f].train_students) {
      check_id(s);
      out << ' ' << s;
    }
    out << '\n';
    out << "fold " << f << " val";
    for (const std::string& s : plan.folds[f].validation_students) {
      check_id(s);
      out << ' ' << s;
    }
    out << '\n';
  }
  if (!out) throw Error::io("short write to '" + path + "'");
}

SplitPlan read_split_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open '" + path + "'");
  SplitPlan plan;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "seed") {
      ss >> plan.seed;
    } else if (tag == "test") {
      std::string s;
      while (ss >> s) plan.test_students.push_back(s);
    } else if (tag == "fold") {
      std::size_t index = 0;
      std::string side;
      ss >> index >> side;
      if (plan.folds.size() <= index) plan.folds.resize(index + 1);
      std::string s;
      std::vector<std::string>& target = side == "train"
                                             ? plan.folds[index].train_students
                                             : plan.folds[index].validation_students;
      if (side != "train" && side != "val")
        throw Error::data("split plan '" + path + "': unknown fold side '" + side + "'");
      while (ss >> s) target.push_back(s);
    } else {
      throw Error::data("split plan '" + path + "': unknown line tag '" + tag + "'");
    }
  }
  return plan;
}

}  // namespace kt::data
