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

#include <cmath>
#include <vector>

#include "kt/errors.hpp"
#include "kt/nn.hpp"
#include "model_detail.hpp"

namespace kt::model {
namespace {

using expand::ExpandedSequence;
using expand::ExpandedStep;
using expand::Label;

// Occurrence groups as [first, last] step ranges.
std::vector<std::pair<std::size_t, std::size_t>> groups_of(const ExpandedSequence& seq) {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t j = 0;
  while (j < seq.steps.size()) {
    std::size_t j0 = j;
    while (j + 1 < seq.steps.size() && seq.steps[j + 1].occurrence == seq.steps[j0].occurrence)
      ++j;
    groups.emplace_back(j0, j);
    ++j;
  }
  return groups;
}

class DktModel final : public SequenceModel {
 public:
  DktModel(const ModelConfig& config, std::int32_t nq, std::int32_t nkc)
      : SequenceModel(config, nq, nkc) {
    Rng rng(config_.seed);
    const std::int32_t d = config_.d, hidden = config_.hidden, kcs = num_kcs_;
    Scalar eb = 1.0 / std::sqrt(static_cast<Scalar>(d));
    nn::init_uniform(params_.create("embed.kc", d, kcs), eb, rng);
    nn::init_uniform(params_.create("embed.g0", d, 1), eb, rng);
    nn::init_uniform(params_.create("embed.g1", d, 1), eb, rng);
    if (is_ml_variant(config_.model_id))
      nn::init_uniform(params_.create("embed.gmask", d, 1), eb, rng);
    nn::init_uniform(params_.create("lstm.wx", 4 * hidden, d), eb, rng);
    nn::init_uniform(params_.create("lstm.wh", 4 * hidden, hidden),
                     1.0 / std::sqrt(static_cast<Scalar>(hidden)), rng);
    Matd& lb = params_.create("lstm.b", 4 * hidden, 1);
    lb.setZero();
    lb.col(0).segment(hidden, hidden).setOnes();  // open forget gates at start
    nn::init_uniform(params_.create("head.w", kcs, hidden),
                     1.0 / std::sqrt(static_cast<Scalar>(hidden)), rng);
    params_.create("head.b", kcs, 1).setZero();
  }

  std::vector<StepPrediction> forward(const ExpandedSequence& window) const override {
    return run(window, nullptr, 1.0, false, nullptr).predictions;
  }

  std::pair<Scalar, std::int64_t> accumulate(const ExpandedSequence& window, Rng& rng,
                                             Scalar grad_scale, bool backprop) override {
    RunResult result = run(window, &rng, grad_scale, backprop, nullptr);
    return {result.bce_sum, static_cast<std::int64_t>(result.predictions.size())};
  }

  std::vector<StepPrediction> all_in_one(const ExpandedSequence& window,
                                         std::int64_t* branches) const override {
    std::int64_t count = 0;
    std::vector<StepPrediction> preds;
    if (config_.model_id == ModelId::dkt) {
      preds = lone_query_branches(window, &count);
    } else {
      // The native policies of dkt-ml, dkt-ad, and dkt-fuse already strip
      // sibling responses, so each branch reconstructs the native
      // computation step for step; one pass covers all of them.
      preds = run(window, nullptr, 1.0, false, nullptr).predictions;
      for (const auto& [j0, j1] : groups_of(window))
        count += config_.model_id == ModelId::dkt_fuse
                     ? window.steps[j0].group_size
                     : static_cast<std::int64_t>(j1 - j0 + 1);
    }
    if (branches) *branches += count;
    return preds;
  }

 private:
  struct UnitCache {
    nn::LstmStepCache lstm;
    Vecd head_mask;       // dropout on the state read by the head
    Vecd logits, sigs;    // per KC of the unit (size 1 unless dkt-fuse)
    bool blended = false; // dkt-ad substitution applied to the input
  };

  struct RunResult {
    std::vector<StepPrediction> predictions;
    Scalar bce_sum = 0.0;
  };

  StepPrediction aligned(const ExpandedStep& step, Scalar p, bool question_wide) const {
    StepPrediction pred;
    pred.probability = nn::clamp_unit(p);
    pred.occurrence = step.occurrence;
    pred.question = step.question;
    pred.kc = question_wide ? -1 : step.kc;
    pred.group_index = question_wide ? 0 : step.group_index;
    pred.target = step.target;
    return pred;
  }

  Vecd response_vector(Label label) const {
    switch (label) {
      case Label::correct:
        return params_.value("embed.g1").col(0);
      case Label::incorrect:
        return params_.value("embed.g0").col(0);
      case Label::mask:
        if (!is_ml_variant(config_.model_id))
          throw Error::data(std::string("mask label fed to ") + model_id_name(config_.model_id));
        return params_.value("embed.gmask").col(0);
    }
    throw Error::data("bad label");
  }

  // Forward pass shared by inference and training; backprop only when asked.
  RunResult run(const ExpandedSequence& window, Rng* rng, Scalar grad_scale, bool backprop,
                std::vector<nn::LstmState>* group_snapshots) const {
    const bool fuse = config_.model_id == ModelId::dkt_fuse;
    const bool ad = config_.model_id == ModelId::dkt_ad;
    const Matd& ekc = params_.value("embed.kc");
    const Matd& head_w = params_.value("head.w");
    const Matd& head_b = params_.value("head.b");
    const std::int32_t hidden = config_.hidden;
    Scalar rate = rng ? config_.dropout : 0.0;

    RunResult result;
    auto groups = groups_of(window);
    nn::LstmState state;
    state.reset(hidden);
    std::vector<UnitCache> caches;
    std::vector<std::size_t> unit_start;  // first step of each unit
    caches.reserve(window.steps.size());

    for (const auto& [j0, j1] : groups) {
      if (group_snapshots) group_snapshots->push_back(state);
      if (fuse) {
        const ExpandedStep& lead = window.steps[j0];
        std::size_t g = j1 - j0 + 1;
        UnitCache cache;
        if (rng)
          cache.head_mask = nn::dropout_mask(hidden, 1, rate, *rng).col(0);
        else
          cache.head_mask = Vecd::Ones(hidden);
        Vecd read = state.h.cwiseProduct(cache.head_mask);
        cache.logits.resize(static_cast<Eigen::Index>(g));
        cache.sigs.resize(static_cast<Eigen::Index>(g));
        Scalar mean = 0.0;
        Vecd input = Vecd::Zero(config_.d);
        for (std::size_t j = j0; j <= j1; ++j) {
          KcId c = window.steps[j].kc;
          Scalar a = head_w.row(c).dot(read) + head_b(c, 0);
          Scalar s = nn::sigmoid(a);
          cache.logits(static_cast<Eigen::Index>(j - j0)) = a;
          cache.sigs(static_cast<Eigen::Index>(j - j0)) = s;
          mean += s;
          input += ekc.col(c);
        }
        mean /= static_cast<Scalar>(g);
        input /= static_cast<Scalar>(g);
        input += response_vector(lead.target ? Label::correct : Label::incorrect);
        result.predictions.push_back(aligned(lead, mean, true));
        result.bce_sum += nn::bce(mean, static_cast<Scalar>(lead.target));
        nn::lstm_step(params_, "lstm", input, state, backprop ? &cache.lstm : nullptr);
        unit_start.push_back(j0);
        caches.push_back(std::move(cache));
        continue;
      }
      for (std::size_t j = j0; j <= j1; ++j) {
        const ExpandedStep& step = window.steps[j];
        UnitCache cache;
        if (rng)
          cache.head_mask = nn::dropout_mask(hidden, 1, rate, *rng).col(0);
        else
          cache.head_mask = Vecd::Ones(hidden);
        Vecd read = state.h.cwiseProduct(cache.head_mask);
        Scalar a = head_w.row(step.kc).dot(read) + head_b(step.kc, 0);
        Scalar s = nn::sigmoid(a);
        cache.logits = Vecd::Constant(1, a);
        cache.sigs = Vecd::Constant(1, s);
        result.predictions.push_back(aligned(step, s, false));
        result.bce_sum += nn::bce(s, static_cast<Scalar>(step.target));

        Vecd input = ekc.col(step.kc);
        if (ad && !step.last_in_group()) {
          cache.blended = true;
          input += s * params_.value("embed.g1").col(0) +
                   (1.0 - s) * params_.value("embed.g0").col(0);
        } else {
          input += response_vector(step.input_label);
        }
        nn::lstm_step(params_, "lstm", input, state, backprop ? &cache.lstm : nullptr);
        unit_start.push_back(j);
        caches.push_back(std::move(cache));
      }
    }

    if (backprop) backward(window, caches, unit_start, grad_scale);
    return result;
  }

  void backward(const ExpandedSequence& window, const std::vector<UnitCache>& caches,
                const std::vector<std::size_t>& unit_start, Scalar grad_scale) const {
    const bool fuse = config_.model_id == ModelId::dkt_fuse;
    const Matd& head_w = params_.value("head.w");
    nn::ParamStore& ps = const_cast<nn::ParamStore&>(params_);
    Matd& d_head_w = ps.grad("head.w");
    Matd& d_head_b = ps.grad("head.b");
    Matd& d_ekc = ps.grad("embed.kc");
    const std::int32_t hidden = config_.hidden;
    const Vecd g1 = params_.value("embed.g1").col(0);
    const Vecd g0 = params_.value("embed.g0").col(0);

    Vecd dh = Vecd::Zero(hidden), dc = Vecd::Zero(hidden);
    for (std::size_t u = caches.size(); u-- > 0;) {
      const UnitCache& cache = caches[u];
      std::size_t j0 = unit_start[u];
      const ExpandedStep& lead = window.steps[j0];

      Vecd dx = Vecd::Zero(config_.d);
      Vecd dh_prev = Vecd::Zero(hidden), dc_prev = Vecd::Zero(hidden);
      nn::lstm_step_backward(ps, "lstm", cache.lstm, dh, dc, dx, dh_prev, dc_prev);

      Vecd read = cache.lstm.h_prev.cwiseProduct(cache.head_mask);
      if (fuse) {
        std::size_t g = static_cast<std::size_t>(cache.sigs.size());
        Scalar mean = cache.sigs.mean();
        Scalar dmean =
            grad_scale * nn::bce_dp(mean, static_cast<Scalar>(lead.target));
        Vecd dg = dx / static_cast<Scalar>(g);
        for (std::size_t i = 0; i < g; ++i) {
          KcId c = window.steps[j0 + i].kc;
          d_ekc.col(c) += dg;
          Scalar s = cache.sigs(static_cast<Eigen::Index>(i));
          Scalar da = dmean * s * (1.0 - s) / static_cast<Scalar>(g);
          d_head_w.row(c) += da * read.transpose();
          d_head_b(c, 0) += da;
          dh_prev += da * head_w.row(c).transpose().cwiseProduct(cache.head_mask);
        }
        ps.grad(lead.target ? "embed.g1" : "embed.g0").col(0) += dx;
      } else {
        const ExpandedStep& step = lead;
        Scalar s = cache.sigs(0);
        Scalar dp_extra = 0.0;
        d_ekc.col(step.kc) += dx;
        if (cache.blended) {
          ps.grad("embed.g1").col(0) += s * dx;
          ps.grad("embed.g0").col(0) += (1.0 - s) * dx;
          dp_extra = dx.dot(g1 - g0);
        } else {
          const char* g = step.input_label == Label::mask      ? "embed.gmask"
                          : step.input_label == Label::correct ? "embed.g1"
                                                               : "embed.g0";
          // dkt-ad last-in-group steps feed the target regardless of label
          if (config_.model_id == ModelId::dkt_ad)
            g = step.target ? "embed.g1" : "embed.g0";
          ps.grad(g).col(0) += dx;
        }
        Scalar da = grad_scale * (s - static_cast<Scalar>(step.target)) +
                    dp_extra * s * (1.0 - s);
        d_head_w.row(step.kc) += da * read.transpose();
        d_head_b(step.kc, 0) += da;
        dh_prev += da * head_w.row(step.kc).transpose().cwiseProduct(cache.head_mask);
      }
      dh = dh_prev;
      dc = dc_prev;
    }
  }

  // Baseline protocol: each KC of a question is asked in isolation from the
  // state accumulated before the question.
  std::vector<StepPrediction> lone_query_branches(const ExpandedSequence& window,
                                                  std::int64_t* count) const {
    const Matd& head_w = params_.value("head.w");
    const Matd& head_b = params_.value("head.b");
    const Matd& ekc = params_.value("embed.kc");
    std::vector<StepPrediction> preds;
    nn::LstmState state;
    state.reset(config_.hidden);
    for (const auto& [j0, j1] : groups_of(window)) {
      for (std::size_t j = j0; j <= j1; ++j) {
        const ExpandedStep& step = window.steps[j];
        Scalar a = head_w.row(step.kc).dot(state.h) + head_b(step.kc, 0);
        preds.push_back(aligned(step, nn::sigmoid(a), false));
        ++*count;
      }
      for (std::size_t j = j0; j <= j1; ++j) {
        const ExpandedStep& step = window.steps[j];
        Vecd input = ekc.col(step.kc) + response_vector(step.input_label);
        nn::lstm_step(params_, "lstm", input, state, nullptr);
      }
    }
    return preds;
  }
};

}  // namespace

namespace detail {
std::unique_ptr<SequenceModel> make_dkt(const ModelConfig& config, std::int32_t num_questions,
                                        std::int32_t num_kcs) {
  return std::make_unique<DktModel>(config, num_questions, num_kcs);
}
}  // namespace detail

}  // namespace kt::model
