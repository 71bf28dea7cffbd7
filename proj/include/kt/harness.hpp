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

#ifndef KT_HARNESS_HPP
#define KT_HARNESS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kt/data.hpp"
#include "kt/eval.hpp"
#include "kt/model.hpp"
#include "kt/types.hpp"

namespace kt::harness {

// Training protocol knobs. batch_size 0 and an unset validation_method mean
// "family default": 128 windows per batch for the recurrent family, 24 for
// the attention family; validation via aggregated one-by-one for leak-free
// models and plain one-by-one for the two baselines.
struct TrainConfig {
  model::ModelConfig model;
  Scalar learning_rate = 1e-3;
  std::int32_t batch_size = 0;
  std::int32_t max_epochs = 100;
  std::int32_t patience = 5;
  std::int32_t window_questions = 100;
  std::optional<eval::EvalMethod> validation_method;
  std::uint64_t seed = 0;

  void validate() const;
  // Copy with every family default materialized.
  TrainConfig resolved() const;
  nlohmann::json to_json() const;  // resolved form only
};

struct EpochStat {
  std::int32_t epoch = 0;  // 1-based
  Scalar train_loss = 0.0;
  double validation_auc = 0.0;  // the configured selection metric
  double validation_accuracy = 0.0;
  // Aggregated one-by-one flavor, always logged so the baseline divergence
  // stays visible; identical to the above when it is the configured method.
  double aggregated_auc = 0.0;
  double aggregated_accuracy = 0.0;
};

// Counts plus FNV-1a hashes of the id maps, enough to verify that a
// reproduction run derived the same dense ids from the raw data.
struct DatasetFingerprint {
  std::int64_t questions = 0;
  std::int64_t kcs = 0;
  std::string questions_hash;
  std::string kcs_hash;
};

struct RunRecord {
  TrainConfig config;  // resolved snapshot
  std::string fold_name = "fold0";
  std::vector<std::string> train_students;
  std::vector<std::string> validation_students;
  std::vector<std::string> test_students;
  std::vector<EpochStat> epochs;
  std::int32_t selected_epoch = 0;
  std::vector<eval::EvalReport> test_reports;
  bool leakage_probed = false;
  eval::LeakageReport leakage;
  DatasetFingerprint dataset;
  std::string environment;
  double wall_seconds = 0.0;

  // include_timing=false drops the wall clock, leaving only the
  // deterministic portion of the record.
  nlohmann::json to_json(bool include_timing = true) const;
};

// Stop once the metric has not improved for `patience` epochs. update()
// returns false when training should stop after the given epoch.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::int32_t patience) : patience_(patience) {}

  bool update(std::int32_t epoch, double metric) {
    if (best_epoch_ == 0 || metric > best_metric_) {
      best_epoch_ = epoch;
      best_metric_ = metric;
      return true;
    }
    return epoch - best_epoch_ < patience_;
  }

  std::int32_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_metric_; }

 private:
  std::int32_t patience_;
  std::int32_t best_epoch_ = 0;
  double best_metric_ = 0.0;
};

struct FoldData {
  std::vector<data::InteractionLog> train_logs;
  std::vector<data::InteractionLog> validation_logs;
};

struct TrainResult {
  std::unique_ptr<model::SequenceModel> trained;
  RunRecord record;
};

std::string environment_fingerprint();

// Adam training with early stopping on validation AUC; the best epoch's
// parameters are restored before returning. Deterministic under fixed seeds,
// shuffling included. Non-finite loss aborts with a divergence error.
TrainResult train(const FoldData& fold, const data::KcMapping& mapping, const TrainConfig& config);

// One record per fold, each evaluated on the shared test set. Baselines get
// an all_in_one test report plus the aggregated flavor for comparison;
// leak-free models validate and test through the same aggregated path.
// Per-fold seeds derive from the fold's student content, so permuting fold
// order permutes the records without changing any fold's metrics. A non-empty
// checkpoint_prefix saves each fold's model to "<prefix>fold<k>.ck".
std::vector<RunRecord> cross_validate(const data::Dataset& dataset, const data::SplitPlan& plan,
                                      const TrainConfig& config,
                                      const std::string& checkpoint_prefix = "");

struct ModelSummary {
  std::string model;
  std::string test_method;  // the method behind the headline numbers
  double auc_mean = 0.0;
  double auc_std = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::vector<double> fold_aucs;
  std::vector<double> fold_accuracies;
};

struct ExperimentSummary {
  nlohmann::json config_echo;
  std::vector<ModelSummary> models;
  std::string fairness;  // attestation text from the window audit

  nlohmann::json to_json() const;
  static ExperimentSummary from_json(const nlohmann::json& j);
};

// Experiment file: {"dataset": dir, "split": {...}, "window": {...},
// "training": {...}, "models": [{"model": name, overrides...}]}. Executes
// split + cross-validation per model behind a window fairness gate, writes
// fold records, summary, and rendered tables under output_dir.
ExperimentSummary run_experiment(const std::string& config_path, const std::string& output_dir);

}  // namespace kt::harness

#endif  // KT_HARNESS_HPP
