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

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kt/checkpoint.hpp"
#include "kt/data.hpp"
#include "kt/errors.hpp"
#include "kt/eval.hpp"
#include "kt/expansion.hpp"
#include "kt/harness.hpp"
#include "kt/model.hpp"
#include "kt/report.hpp"

namespace {

using namespace kt;

// --data falls back to KTLAB_DATA_ROOT so scripted runs can omit the flag.
std::string resolve_data(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("KTLAB_DATA_ROOT"); env && *env) return env;
  throw Error::usage("no --data given and KTLAB_DATA_ROOT is unset");
}

eval::EvalMethod parse_method_flag(std::string name) {
  std::replace(name.begin(), name.end(), '-', '_');
  return eval::parse_eval_method(name);
}

eval::EvalReport run_method(const model::SequenceModel& model,
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
  throw Error::usage("unhandled evaluation method");
}

int cmd_prepare(const std::string& kind_name, const std::string& input, const std::string& output,
                bool corr) {
  auto kind = data::parse_dataset_kind(kind_name);
  auto ds = data::load_dataset(input, kind);
  data::write_dataset_dir(ds, output);
  std::cout << output << "\n" << ds.report.to_json() << "\n";
  if (corr) {
    auto twin = data::corr_transform(ds);
    data::write_dataset_dir(twin, output + "-corr");
    std::cout << output << "-corr\n" << twin.report.to_json() << "\n";
  }
  return 0;
}

int cmd_stats(const std::string& data_flag, bool as_json) {
  auto ds = data::load_dataset_dir(resolve_data(data_flag));
  auto stats = data::compute_stats(ds.logs, ds.mapping);
  std::cout << (as_json ? stats.to_json() + "\n" : stats.to_text());
  return 0;
}

int cmd_split(const std::string& data_flag, double test_fraction, std::int32_t folds,
              std::uint64_t seed, std::string output) {
  auto dir = resolve_data(data_flag);
  auto ds = data::load_dataset_dir(dir);
  auto plan = data::split_dataset(ds.logs, test_fraction, folds, seed);
  if (output.empty()) output = dir + "/split.json";
  data::write_split_plan(plan, output);
  std::cout << output << " (test " << plan.test_students.size() << ", folds " << plan.folds.size()
            << ")\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& output) {
  auto summary = harness::run_experiment(config, output);
  std::cout << report::comparison_markdown(summary) << output << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_flag,
                 const std::string& method_name, std::int32_t window) {
  auto method = parse_method_flag(method_name);
  data::IdMap questions, kcs;
  auto model = model::load_checkpoint(checkpoint, &questions, &kcs);
  auto dir = resolve_data(data_flag);
  auto ds = data::load_dataset_dir(dir);
  if (!(questions == ds.question_ids) || !(kcs == ds.kc_ids))
    throw Error::data("checkpoint id maps do not match dataset '" + dir + "'");
  auto plan = expand::build_window_plan(ds.logs, ds.mapping, model->policy(), window);
  if (method == eval::EvalMethod::all_in_one && model->leakage_free())
    std::cout << "note: model is leakage-free; all_in_one equals the aggregated one-by-one path\n";
  std::cout << run_method(*model, plan.windows, method).to_json() << "\n";
  return 0;
}

int cmd_audit(const std::string& checkpoint, const std::string& data_flag, std::int64_t samples,
              std::uint64_t seed, std::int32_t window) {
  data::IdMap questions, kcs;
  auto model = model::load_checkpoint(checkpoint, &questions, &kcs);
  auto dir = resolve_data(data_flag);
  auto ds = data::load_dataset_dir(dir);
  if (!(questions == ds.question_ids) || !(kcs == ds.kc_ids))
    throw Error::data("checkpoint id maps do not match dataset '" + dir + "'");
  auto plan = expand::build_window_plan(ds.logs, ds.mapping, model->policy(), window);
  auto report = eval::leakage_probe(*model, plan.windows, samples, seed);
  std::cout << "verdict " << report.verdict() << "\n" << report.to_json() << "\n";
  return 0;
}

int cmd_report(const std::string& runs, const std::string& format) {
  auto path = runs + "/summary.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("'" + path + "': " + e.what());
  }
  auto summary = harness::ExperimentSummary::from_json(j);
  if (format == "csv")
    std::cout << report::comparison_csv(summary);
  else if (format == "markdown")
    std::cout << report::comparison_markdown(summary);
  else if (format == "json")
    std::cout << summary.to_json().dump(2) << "\n";
  else
    throw Error::usage("unknown report format '" + format + "' (expected csv, json, or markdown)");
  report::write_comparison(summary, runs);  // refresh the static table and plot files
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"leakage-aware knowledge tracing workbench"};
  app.require_subcommand(1);

  std::string prep_kind, prep_input, prep_output;
  bool prep_corr = false;
  auto* prepare = app.add_subcommand("prepare", "Ingest a raw dataset into the canonical layout");
  prepare->add_option("--dataset", prep_kind, "Source kind: assistments2009 or canonical")
      ->required();
  prepare->add_option("--input", prep_input, "Raw input file")->required();
  prepare->add_option("--output", prep_output, "Output dataset directory")->required();
  prepare->add_flag("--corr-transform", prep_corr,
                    "Also write the KC twin transform to <output>-corr");

  std::string stats_data;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "Print dataset attributes");
  stats->add_option("--data", stats_data, "Dataset directory (default: KTLAB_DATA_ROOT)");
  stats->add_flag("--json", stats_json, "Emit JSON instead of text");

  std::string split_data, split_output;
  double split_fraction = 0.2;
  std::int32_t split_folds = 5;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Write a test/fold split plan");
  split->add_option("--data", split_data, "Dataset directory (default: KTLAB_DATA_ROOT)");
  split->add_option("--test-fraction", split_fraction, "Held-out student fraction");
  split->add_option("--folds", split_folds, "Cross-validation fold count");
  split->add_option("--seed", split_seed, "Shuffle seed");
  split->add_option("--output", split_output, "Plan path (default: <data>/split.json)");

  std::string train_config, train_output = "runs";
  auto* train = app.add_subcommand("train", "Run an experiment config end to end");
  train->add_option("--config", train_config, "Experiment config file")->required();
  train->add_option("--output", train_output, "Report directory");

  std::string eval_ck, eval_data, eval_method = "one_by_one";
  std::int32_t eval_window = 100;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", eval_ck, "Checkpoint file")->required();
  evaluate->add_option("--data", eval_data, "Dataset directory (default: KTLAB_DATA_ROOT)");
  evaluate->add_option("--method", eval_method,
                       "one_by_one, all_in_one, or aggregated_one_by_one");
  evaluate->add_option("--window", eval_window, "Question occurrences per window");

  std::string audit_ck, audit_data;
  std::int64_t audit_samples = 25;
  std::uint64_t audit_seed = 0;
  std::int32_t audit_window = 100;
  auto* audit = app.add_subcommand("audit", "Probe a checkpoint for label leakage");
  audit->add_option("--checkpoint", audit_ck, "Checkpoint file")->required();
  audit->add_option("--data", audit_data, "Dataset directory (default: KTLAB_DATA_ROOT)");
  audit->add_option("--samples", audit_samples, "Flipped occurrences to sample");
  audit->add_option("--seed", audit_seed, "Sampling seed");
  audit->add_option("--window", audit_window, "Question occurrences per window");

  std::string report_runs, report_format = "markdown";
  auto* report = app.add_subcommand("report", "Render a finished experiment's comparison");
  report->add_option("--runs", report_runs, "Experiment report directory")->required();
  report->add_option("--format", report_format, "csv, json, or markdown");

  try {
    app.parse(argc, argv);
    if (prepare->parsed()) return cmd_prepare(prep_kind, prep_input, prep_output, prep_corr);
    if (stats->parsed()) return cmd_stats(stats_data, stats_json);
    if (split->parsed())
      return cmd_split(split_data, split_fraction, split_folds, split_seed, split_output);
    if (train->parsed()) return cmd_train(train_config, train_output);
    if (evaluate->parsed()) return cmd_evaluate(eval_ck, eval_data, eval_method, eval_window);
    if (audit->parsed())
      return cmd_audit(audit_ck, audit_data, audit_samples, audit_seed, audit_window);
    if (report->parsed()) return cmd_report(report_runs, report_format);
    throw kt::Error::usage("no subcommand given");
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "ktlab: error [usage]: " << e.what() << "\n";
    return 2;
  } catch (const kt::Error& e) {
    std::cerr << "ktlab: error [" << kt::category_name(e.category()) << "]: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "ktlab: error [data]: " << e.what() << "\n";
    return static_cast<int>(kt::ErrorCategory::data);
  }
}
