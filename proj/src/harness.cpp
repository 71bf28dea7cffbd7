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

#include "kt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "kt/checkpoint.hpp"
#include "kt/errors.hpp"
#include "kt/expansion.hpp"
#include "kt/params.hpp"
#include "kt/report.hpp"

namespace kt::harness {

namespace {

std::int32_t default_batch_size(model::ModelId id) { return model::is_dkt_family(id) ? 128 : 24; }

std::uint64_t fnv64_names(const std::vector<std::string>& names) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& name : names) {
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv64_idmap(const data::IdMap& map) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(map.size()));
  for (std::int32_t i = 0; i < map.size(); ++i) names.push_back(map.raw(i));
  return fnv64_names(names);
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

eval::EvalMethod default_validation_method(model::ModelId id) {
  return model::is_leakage_free(id) ? eval::EvalMethod::aggregated_one_by_one
                                    : eval::EvalMethod::one_by_one;
}

std::int64_t loss_units(const expand::ExpandedSequence& window, model::ModelId id) {
  return model::question_level(id) ? window.question_count : window.length();
}

eval::EvalReport evaluate_with(const model::SequenceModel& model,
                               const std::vector<expand::ExpandedSequence>& windows,
                               eval::EvalMethod method) {
  switch (method) {
    case eval::EvalMethod::one_by_one:
      return eval::summarize(eval::eval_one_by_one(model, windows), method);
    case eval::EvalMethod::aggregated_one_by_one:
      return eval::summarize(eval::aggregate_by_question(eval::eval_one_by_one(model, windows)),
                             method);
    case eval::EvalMethod::all_in_one:
      return eval::summarize(eval::eval_all_in_one(model, windows), method);
  }
  throw Error::data("unhandled evaluation method");
}

std::vector<std::string> student_names(const std::vector<data::InteractionLog>& logs) {
  std::vector<std::string> names;
  names.reserve(logs.size());
  for (const auto& log : logs) names.push_back(log.student);
  return names;
}

bool has_probe_sites(const std::vector<expand::ExpandedSequence>& windows) {
  for (const auto& win : windows)
    for (const auto& step : win.steps)
      if (step.group_index == 0 && step.group_size >= 2) return true;
  return false;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Population std over the folds actually run.
double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error::usage("learning_rate must be positive and finite");
  if (batch_size < 0) throw Error::usage("batch_size must be non-negative (0 = family default)");
  if (max_epochs < 1) throw Error::usage("max_epochs must be at least 1");
  if (patience < 1 || patience > max_epochs)
    throw Error::usage("patience must be in [1, max_epochs]");
  if (window_questions < 1) throw Error::usage("window_questions must be at least 1");
  if (validation_method && *validation_method == eval::EvalMethod::all_in_one)
    throw Error::usage("validation_method must be one_by_one or aggregated_one_by_one");
}

TrainConfig TrainConfig::resolved() const {
  TrainConfig r = *this;
  if (r.batch_size == 0) r.batch_size = default_batch_size(model.model_id);
  if (!r.validation_method) r.validation_method = default_validation_method(model.model_id);
  return r;
}

nlohmann::json TrainConfig::to_json() const {
  TrainConfig r = resolved();
  return nlohmann::json{{"model", r.model.to_json()},
                        {"learning_rate", r.learning_rate},
                        {"batch_size", r.batch_size},
                        {"max_epochs", r.max_epochs},
                        {"patience", r.patience},
                        {"window_questions", r.window_questions},
                        {"validation_method", eval::eval_method_name(*r.validation_method)},
                        {"seed", r.seed}};
}

nlohmann::json RunRecord::to_json(bool include_timing) const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs)
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"validation_auc", e.validation_auc},
                           {"validation_accuracy", e.validation_accuracy},
                           {"aggregated_auc", e.aggregated_auc},
                           {"aggregated_accuracy", e.aggregated_accuracy}});
  nlohmann::json reports_json = nlohmann::json::array();
  for (const auto& r : test_reports) reports_json.push_back(nlohmann::json::parse(r.to_json()));
  nlohmann::json leakage_json = {{"probed", leakage_probed}};
  if (leakage_probed) leakage_json["report"] = nlohmann::json::parse(leakage.to_json());
  nlohmann::json j = {{"version", 1},
                      {"fold", fold_name},
                      {"config", config.to_json()},
                      {"students",
                       {{"train", train_students},
                        {"validation", validation_students},
                        {"test", test_students}}},
                      {"dataset",
                       {{"questions", dataset.questions},
                        {"kcs", dataset.kcs},
                        {"questions_fnv64", dataset.questions_hash},
                        {"kcs_fnv64", dataset.kcs_hash}}},
                      {"epochs", epochs_json},
                      {"selected_epoch", selected_epoch},
                      {"test_reports", reports_json},
                      {"leakage", leakage_json},
                      {"environment", environment}};
  if (include_timing) j["timing"] = {{"wall_seconds", wall_seconds}};
  return j;
}

std::string environment_fingerprint() {
  std::ostringstream out;
  out << "compiler " << __VERSION__ << "; eigen " << EIGEN_WORLD_VERSION << '.'
      << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  return out.str();
}

TrainResult train(const FoldData& fold, const data::KcMapping& mapping,
                  const TrainConfig& config) {
  config.validate();
  const TrainConfig cfg = config.resolved();
  const model::ModelId id = cfg.model.model_id;
  const auto policy = model::native_policy(id);
  const auto start = std::chrono::steady_clock::now();

  if (fold.train_logs.empty()) throw Error::data("training fold has no students");
  if (fold.validation_logs.empty()) throw Error::data("training fold has no validation students");

  // Batches draw windows with each student's windows kept adjacent; only the
  // student order reshuffles per epoch.
  std::vector<std::vector<expand::ExpandedSequence>> per_student;
  per_student.reserve(fold.train_logs.size());
  for (const auto& log : fold.train_logs)
    per_student.push_back(expand::window(expand::expand(log, mapping, policy),
                                         cfg.window_questions));
  auto val_plan = expand::build_window_plan(fold.validation_logs, mapping, policy,
                                            cfg.window_questions);

  auto model = model::make_model(cfg.model, mapping.num_questions(), mapping.num_kcs);
  nn::Adam optimizer(cfg.learning_rate);
  Rng root(cfg.seed);

  RunRecord record;
  record.config = cfg;
  record.train_students = student_names(fold.train_logs);
  record.validation_students = student_names(fold.validation_logs);
  record.dataset.questions = mapping.num_questions();
  record.dataset.kcs = mapping.num_kcs;
  record.environment = environment_fingerprint();

  EarlyStopper stopper(cfg.patience);
  std::vector<Matd> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto& name : model->params().names()) best.push_back(model->params().value(name));
  };
  auto restore = [&] {
    std::size_t i = 0;
    for (const auto& name : model->params().names()) model->params().value(name) = best[i++];
  };

  std::vector<std::size_t> order(per_student.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::int32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng epoch_rng = root.fork(static_cast<std::uint64_t>(epoch));
    shuffle(order, epoch_rng);
    std::vector<const expand::ExpandedSequence*> queue;
    for (std::size_t s : order)
      for (const auto& win : per_student[s]) queue.push_back(&win);

    Scalar loss_sum = 0.0;
    std::int64_t step_sum = 0;
    for (std::size_t begin = 0; begin < queue.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(queue.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::int64_t batch_units = 0;
      for (std::size_t i = begin; i < end; ++i) batch_units += loss_units(*queue[i], id);
      if (batch_units == 0) continue;
      const Scalar grad_scale = 1.0 / static_cast<Scalar>(batch_units);
      for (std::size_t i = begin; i < end; ++i) {
        auto [bce_sum, steps] = model->accumulate(*queue[i], epoch_rng, grad_scale, true);
        if (!std::isfinite(bce_sum))
          throw Error::divergence("training diverged: non-finite loss (model " +
                                  std::string(model::model_id_name(id)) + ", epoch " +
                                  std::to_string(epoch) + ")");
        loss_sum += bce_sum;
        step_sum += steps;
      }
      optimizer.step(model->params());
      model->params().zero_grad();
    }

    auto trace = eval::eval_one_by_one(*model, val_plan.windows);
    auto aggregated = eval::summarize(eval::aggregate_by_question(trace),
                                      eval::EvalMethod::aggregated_one_by_one);
    auto val = *cfg.validation_method == eval::EvalMethod::aggregated_one_by_one
                   ? aggregated
                   : eval::summarize(trace, eval::EvalMethod::one_by_one);
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = step_sum > 0 ? loss_sum / static_cast<Scalar>(step_sum) : 0.0;
    stat.validation_auc = val.auc;
    stat.validation_accuracy = val.accuracy;
    stat.aggregated_auc = aggregated.auc;
    stat.aggregated_accuracy = aggregated.accuracy;
    record.epochs.push_back(stat);

    bool keep_going = stopper.update(epoch, val.auc);
    if (stopper.best_epoch() == epoch) snapshot();
    if (!keep_going) break;
  }

  restore();
  record.selected_epoch = stopper.best_epoch();
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainResult{std::move(model), std::move(record)};
}

std::vector<RunRecord> cross_validate(const data::Dataset& dataset, const data::SplitPlan& plan,
                                      const TrainConfig& config,
                                      const std::string& checkpoint_prefix) {
  config.validate();
  const TrainConfig base = config.resolved();
  data::validate_split_plan(plan, dataset.logs);

  std::unordered_map<std::string, const data::InteractionLog*> by_student;
  for (const auto& log : dataset.logs) by_student[log.student] = &log;
  auto pick = [&](const std::vector<std::string>& students) {
    std::vector<data::InteractionLog> logs;
    logs.reserve(students.size());
    for (const auto& s : students) logs.push_back(*by_student.at(s));
    return logs;
  };

  const auto test_logs = pick(plan.test_students);
  const auto policy = model::native_policy(base.model.model_id);
  auto test_plan = expand::build_window_plan(test_logs, dataset.mapping, policy,
                                             base.window_questions);

  std::vector<RunRecord> records;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    // Seeds hang off the fold's validation membership, not its position, so
    // reordering folds cannot change any fold's numbers.
    const std::uint64_t token = fnv64_names(plan.folds[f].validation_students);
    TrainConfig fold_cfg = base;
    fold_cfg.seed = base.seed ^ token;
    fold_cfg.model.seed = base.model.seed ^ mix64(token);

    FoldData fold;
    fold.train_logs = pick(plan.folds[f].train_students);
    fold.validation_logs = pick(plan.folds[f].validation_students);

    auto result = train(fold, dataset.mapping, fold_cfg);
    result.record.fold_name = "fold" + std::to_string(f);
    result.record.test_students = plan.test_students;
    result.record.dataset.questions = static_cast<std::int64_t>(dataset.question_ids.size());
    result.record.dataset.kcs = static_cast<std::int64_t>(dataset.kc_ids.size());
    result.record.dataset.questions_hash = hex64(fnv64_idmap(dataset.question_ids));
    result.record.dataset.kcs_hash = hex64(fnv64_idmap(dataset.kc_ids));

    if (model::is_leakage_free(base.model.model_id)) {
      result.record.test_reports.push_back(evaluate_with(
          *result.trained, test_plan.windows, eval::EvalMethod::aggregated_one_by_one));
    } else {
      result.record.test_reports.push_back(
          evaluate_with(*result.trained, test_plan.windows, eval::EvalMethod::all_in_one));
      result.record.test_reports.push_back(evaluate_with(
          *result.trained, test_plan.windows, eval::EvalMethod::aggregated_one_by_one));
    }

    if (has_probe_sites(test_plan.windows)) {
      result.record.leakage = eval::leakage_probe(*result.trained, test_plan.windows, 25,
                                                  fold_cfg.seed);
      result.record.leakage_probed = true;
    }

    if (!checkpoint_prefix.empty())
      model::save_checkpoint(checkpoint_prefix + "fold" + std::to_string(f) + ".ck",
                             *result.trained, dataset.question_ids, dataset.kc_ids);

    records.push_back(std::move(result.record));
  }
  return records;
}

nlohmann::json ExperimentSummary::to_json() const {
  nlohmann::json models_json = nlohmann::json::array();
  for (const auto& m : models)
    models_json.push_back({{"model", m.model},
                           {"test_method", m.test_method},
                           {"auc", {{"mean", m.auc_mean}, {"std", m.auc_std}, {"folds", m.fold_aucs}}},
                           {"accuracy",
                            {{"mean", m.accuracy_mean},
                             {"std", m.accuracy_std},
                             {"folds", m.fold_accuracies}}}});
  return nlohmann::json{
      {"version", 1}, {"config", config_echo}, {"fairness", fairness}, {"models", models_json}};
}

ExperimentSummary ExperimentSummary::from_json(const nlohmann::json& j) {
  ExperimentSummary s;
  s.config_echo = j.value("config", nlohmann::json::object());
  s.fairness = j.value("fairness", std::string());
  for (const auto& mj : j.at("models")) {
    ModelSummary m;
    m.model = mj.at("model").get<std::string>();
    m.test_method = mj.at("test_method").get<std::string>();
    m.auc_mean = mj.at("auc").at("mean").get<double>();
    m.auc_std = mj.at("auc").at("std").get<double>();
    m.fold_aucs = mj.at("auc").at("folds").get<std::vector<double>>();
    m.accuracy_mean = mj.at("accuracy").at("mean").get<double>();
    m.accuracy_std = mj.at("accuracy").at("std").get<double>();
    m.fold_accuracies = mj.at("accuracy").at("folds").get<std::vector<double>>();
    s.models.push_back(std::move(m));
  }
  return s;
}

namespace {

TrainConfig apply_overrides(const nlohmann::json& entry, TrainConfig base) {
  model::ModelConfig mc = base.model;
  if (entry.count("model")) mc.model_id = model::parse_model_id(entry.at("model").get<std::string>());
  mc.d = entry.value("d", mc.d);
  mc.hidden = entry.value("hidden", mc.hidden);
  mc.attention_blocks = entry.value("attention_blocks", mc.attention_blocks);
  mc.attention_heads = entry.value("attention_heads", mc.attention_heads);
  mc.dropout = entry.value("dropout", mc.dropout);
  mc.seed = entry.value("model_seed", mc.seed);
  base.model = mc;
  base.learning_rate = entry.value("learning_rate", base.learning_rate);
  base.batch_size = entry.value("batch_size", base.batch_size);
  base.max_epochs = entry.value("max_epochs", base.max_epochs);
  base.patience = entry.value("patience", base.patience);
  base.window_questions = entry.value("window_questions", base.window_questions);
  base.seed = entry.value("seed", base.seed);
  if (entry.count("validation_method"))
    base.validation_method =
        eval::parse_eval_method(entry.at("validation_method").get<std::string>());
  return base;
}

data::Dataset load_experiment_dataset(const nlohmann::json& dj) {
  data::Dataset ds;
  if (dj.count("dir")) {
    ds = data::load_dataset_dir(dj.at("dir").get<std::string>());
  } else if (dj.count("synthetic")) {
    const auto& sj = dj.at("synthetic");
    data::SyntheticSpec spec;
    spec.num_students = sj.value("num_students", spec.num_students);
    spec.num_questions = sj.value("num_questions", spec.num_questions);
    spec.num_kcs = sj.value("num_kcs", spec.num_kcs);
    spec.kcs_per_question = sj.value("kcs_per_question", spec.kcs_per_question);
    spec.seed = sj.value("seed", spec.seed);
    spec.discrimination = sj.value("discrimination", spec.discrimination);
    std::string mode = sj.value("mode", std::string("independent"));
    if (mode == "independent")
      spec.mode = data::CorrelationMode::independent;
    else if (mode == "duplicated")
      spec.mode = data::CorrelationMode::duplicated;
    else
      throw Error::data("unknown synthetic mode '" + mode + "'");
    ds = data::generate_synthetic(spec);
  } else {
    throw Error::data("experiment config needs dataset.dir or dataset.synthetic");
  }
  if (dj.value("corr_transform", false)) ds = data::corr_transform(ds);
  return ds;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error::io("failed writing '" + path + "'");
}

}  // namespace

ExperimentSummary run_experiment(const std::string& config_path, const std::string& output_dir) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw Error::io("cannot open experiment config '" + config_path + "'");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("experiment config '" + config_path + "': " + e.what());
  }

  try {
    auto dataset = load_experiment_dataset(cfg.at("dataset"));

    const auto& sj = cfg.value("split", nlohmann::json::object());
    auto plan = data::split_dataset(dataset.logs, sj.value("test_fraction", 0.2),
                                    sj.value("folds", 5), sj.value("seed", std::uint64_t{0}));

    TrainConfig base;
    base.window_questions = cfg.value("window", nlohmann::json::object()).value("questions", 100);
    base = apply_overrides(cfg.value("training", nlohmann::json::object()), base);

    const auto& models_json = cfg.at("models");
    if (!models_json.is_array() || models_json.empty())
      throw Error::data("experiment config needs a non-empty models array");

    std::vector<std::string> labels;
    std::vector<TrainConfig> configs;
    for (const auto& entry : models_json) {
      if (!entry.count("model")) throw Error::data("every models entry needs a model name");
      TrainConfig tc = apply_overrides(entry, base);
      std::string label = model::model_id_name(tc.model.model_id);
      while (std::find(labels.begin(), labels.end(), label) != labels.end()) label += "+";
      labels.push_back(label);
      configs.push_back(tc.resolved());
    }

    // Fairness gate: every model under comparison must see the identical
    // test windows before any number is reported.
    std::unordered_map<std::string, const data::InteractionLog*> by_student;
    for (const auto& log : dataset.logs) by_student[log.student] = &log;
    std::vector<data::InteractionLog> test_logs;
    for (const auto& s : plan.test_students) test_logs.push_back(*by_student.at(s));
    std::vector<expand::WindowPlan> test_plans;
    test_plans.reserve(configs.size());
    for (const auto& tc : configs)
      test_plans.push_back(expand::build_window_plan(test_logs, dataset.mapping,
                                                     model::native_policy(tc.model.model_id),
                                                     tc.window_questions));
    std::vector<std::pair<std::string, const expand::WindowPlan*>> named;
    for (std::size_t i = 0; i < configs.size(); ++i) named.emplace_back(labels[i], &test_plans[i]);
    auto fairness = expand::fairness_check(named);
    if (!fairness.fair) throw Error::fairness(fairness.to_text());

    std::filesystem::create_directories(std::filesystem::path(output_dir) / "records");

    // A dataset that only existed in memory (synthetic, or a transform of a
    // directory) is materialized next to the records so checkpoints stay
    // evaluable and the run stays reproducible.
    const auto& dj = cfg.at("dataset");
    if (!dj.count("dir") || dj.value("corr_transform", false))
      data::write_dataset_dir(dataset, (std::filesystem::path(output_dir) / "dataset").string());

    ExperimentSummary summary;
    summary.config_echo = cfg;
    summary.fairness = fairness.to_text();
    for (std::size_t i = 0; i < configs.size(); ++i) {
      auto prefix = (std::filesystem::path(output_dir) / "records" / (labels[i] + "-")).string();
      auto records = cross_validate(dataset, plan, configs[i], prefix);
      ModelSummary ms;
      ms.model = labels[i];
      for (const auto& rec : records) {
        const auto& head = rec.test_reports.front();
        ms.test_method = eval::eval_method_name(head.method);
        ms.fold_aucs.push_back(head.auc);
        ms.fold_accuracies.push_back(head.accuracy);
        auto rec_path = std::filesystem::path(output_dir) / "records" /
                        (labels[i] + "-" + rec.fold_name + ".json");
        write_text(rec_path.string(), rec.to_json(true).dump(2) + "\n");
      }
      ms.auc_mean = mean_of(ms.fold_aucs);
      ms.auc_std = std_of(ms.fold_aucs);
      ms.accuracy_mean = mean_of(ms.fold_accuracies);
      ms.accuracy_std = std_of(ms.fold_accuracies);
      summary.models.push_back(std::move(ms));
    }

    write_text((std::filesystem::path(output_dir) / "summary.json").string(),
               summary.to_json().dump(2) + "\n");
    write_text((std::filesystem::path(output_dir) / "fairness.txt").string(), summary.fairness);
    report::write_comparison(summary, output_dir);
    return summary;
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("experiment config '" + config_path + "': " + e.what());
  }
}

}  // namespace kt::harness
