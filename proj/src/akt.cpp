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
#include <string>
#include <vector>

#include "kt/errors.hpp"
#include "kt/masks.hpp"
#include "kt/nn.hpp"
#include "model_detail.hpp"

namespace kt::model {
namespace {

using expand::ExpandedSequence;
using expand::ExpandedStep;
using expand::Label;

// Attention stack: input projections for the question and response streams,
// causal self-attention blocks over questions, one retrieval attention that
// reads response values under the variant's response mask, and a two-layer
// head. Residual connections throughout; positions with no visible history
// fall back to the question stream alone.
class AktModel final : public SequenceModel {
 public:
  AktModel(const ModelConfig& config, std::int32_t nq, std::int32_t nkc)
      : SequenceModel(config, nq, nkc) {
    Rng rng(config_.seed);
    const std::int32_t d = config_.d, hidden = config_.hidden;
    const std::int32_t inner = 2 * hidden;
    Scalar eb = 1.0 / std::sqrt(static_cast<Scalar>(d));
    Scalar hb = 1.0 / std::sqrt(static_cast<Scalar>(hidden));
    Scalar ib = 1.0 / std::sqrt(static_cast<Scalar>(inner));

    nn::init_uniform(params_.create("embed.kc", d, num_kcs_), eb, rng);
    nn::init_uniform(params_.create("embed.g0", d, 1), eb, rng);
    nn::init_uniform(params_.create("embed.g1", d, 1), eb, rng);
    if (is_ml_variant(config_.model_id))
      nn::init_uniform(params_.create("embed.gmask", d, 1), eb, rng);
    nn::init_uniform(params_.create("embed.dvar", d, num_kcs_), eb, rng);
    nn::init_uniform(params_.create("embed.f0", d, num_kcs_), eb, rng);
    nn::init_uniform(params_.create("embed.f1", d, num_kcs_), eb, rng);
    if (config_.model_id == ModelId::akt_ml)
      nn::init_uniform(params_.create("embed.fmask", d, num_kcs_), eb, rng);
    params_.create("embed.mu", 1, num_questions_).setZero();

    for (const char* stream : {"in_q", "in_v"}) {
      nn::init_uniform(params_.create(std::string(stream) + ".w", hidden, d), eb, rng);
      params_.create(std::string(stream) + ".b", hidden, 1).setZero();
    }
    auto make_attn = [&](const std::string& prefix) {
      for (const char* t : {".wq", ".wk", ".wv", ".wo"})
        nn::init_uniform(params_.create(prefix + t, hidden, hidden), hb, rng);
      params_.create(prefix + ".bo", hidden, 1).setZero();
    };
    auto make_ffn = [&](const std::string& prefix) {
      nn::init_uniform(params_.create(prefix + "1.w", inner, hidden), hb, rng);
      params_.create(prefix + "1.b", inner, 1).setZero();
      nn::init_uniform(params_.create(prefix + "2.w", hidden, inner), ib, rng);
      params_.create(prefix + "2.b", hidden, 1).setZero();
    };
    for (std::int32_t b = 0; b < config_.attention_blocks; ++b) {
      make_attn(block_name(b) + ".attn");
      make_ffn(block_name(b) + ".ffn");
    }
    make_attn("ret.attn");
    make_ffn("ret.ffn");
    nn::init_uniform(params_.create("head1.w", hidden, hidden), hb, rng);
    params_.create("head1.b", hidden, 1).setZero();
    nn::init_uniform(params_.create("head2.w", 1, hidden), hb, rng);
    params_.create("head2.b", 1, 1).setZero();
  }

  std::vector<StepPrediction> forward(const ExpandedSequence& window) const override {
    Scalar unused;
    return run(window, nullptr, 0.0, false, unused);
  }

  std::pair<Scalar, std::int64_t> accumulate(const ExpandedSequence& window, Rng& rng,
                                             Scalar grad_scale, bool backprop) override {
    Scalar bce_sum = 0.0;
    auto preds = run(window, &rng, grad_scale, backprop, bce_sum);
    return {bce_sum, static_cast<std::int64_t>(preds.size())};
  }

  std::vector<StepPrediction> all_in_one(const ExpandedSequence& window,
                                         std::int64_t* branches) const override {
    std::int64_t count = 0;
    std::vector<StepPrediction> preds;
    if (config_.model_id == ModelId::akt) {
      // Baseline protocol: isolate each KC query after the pre-question
      // history; sibling steps are omitted so their responses cannot enter.
      for (std::size_t j = 0; j < window.steps.size(); ++j) {
        std::size_t j0 = j;
        while (j0 > 0 && window.steps[j0 - 1].occurrence == window.steps[j].occurrence) --j0;
        ExpandedSequence branch;
        branch.student = window.student;
        branch.steps.assign(window.steps.begin(),
                            window.steps.begin() + static_cast<std::ptrdiff_t>(j0));
        branch.steps.push_back(window.steps[j]);
        Scalar unused;
        auto branch_preds = run(branch, nullptr, 0.0, false, unused);
        preds.push_back(branch_preds.back());
        ++count;
      }
    } else {
      // akt-ml and akt-qm: the causal masks make each per-step prediction
      // depend only on its prefix, and the native inputs already carry no
      // sibling responses; branches reproduce the native pass exactly.
      Scalar unused;
      preds = run(window, nullptr, 0.0, false, unused);
      count = static_cast<std::int64_t>(window.steps.size());
    }
    if (branches) *branches += count;
    return preds;
  }

 private:
  static std::string block_name(std::int32_t b) { return "enc" + std::to_string(b); }

  Label value_label(const ExpandedStep& step) const {
    if (step.input_label == Label::mask && config_.model_id != ModelId::akt_ml)
      throw Error::data(std::string("mask label fed to ") + model_id_name(config_.model_id));
    return step.input_label;
  }

  const char* g_name(Label label) const {
    return label == Label::mask ? "embed.gmask" : label == Label::correct ? "embed.g1" : "embed.g0";
  }
  const char* f_name(Label label) const {
    return label == Label::mask ? "embed.fmask" : label == Label::correct ? "embed.f1" : "embed.f0";
  }

  struct FfnCache {
    Matd input, z1, mask, kept;  // kept = relu(z1) .* mask
  };

  // Residual feed-forward with dropout on the inner activation.
  Matd ffn(const std::string& prefix, const Matd& x, Scalar rate, Rng* rng,
           FfnCache* cache) const {
    Matd z1 = nn::linear(params_, prefix + "1", x);
    Matd mask = rng ? nn::dropout_mask(z1.rows(), z1.cols(), rate, *rng)
                    : Matd::Ones(z1.rows(), z1.cols());
    Matd kept = nn::relu(z1).cwiseProduct(mask);
    Matd out = x + nn::linear(params_, prefix + "2", kept);
    if (cache) {
      cache->input = x;
      cache->z1 = std::move(z1);
      cache->mask = std::move(mask);
      cache->kept = std::move(kept);
    }
    return out;
  }

  // dout is d(loss)/d(ffn output); returns d(loss)/d(ffn input).
  Matd ffn_backward(const std::string& prefix, const FfnCache& cache, const Matd& dout) const {
    nn::ParamStore& ps = const_cast<nn::ParamStore&>(params_);
    Matd dkept = Matd::Zero(cache.kept.rows(), cache.kept.cols());
    nn::linear_backward(ps, prefix + "2", cache.kept, dout, &dkept);
    Matd dz1 = nn::relu_backward(cache.z1, dkept.cwiseProduct(cache.mask));
    Matd dx = dout;  // residual
    nn::linear_backward(ps, prefix + "1", cache.input, dz1, &dx);
    return dx;
  }

  std::vector<StepPrediction> run(const ExpandedSequence& window, Rng* rng, Scalar grad_scale,
                                  bool backprop, Scalar& bce_sum) const {
    const Eigen::Index n = static_cast<Eigen::Index>(window.steps.size());
    std::vector<StepPrediction> preds;
    if (n == 0) return preds;
    const std::int32_t hidden = config_.hidden, heads = config_.attention_heads;
    const Scalar rate = rng ? config_.dropout : 0.0;
    const Matd& ekc = params_.value("embed.kc");
    const Matd& dvar = params_.value("embed.dvar");
    const Matd& mu = params_.value("embed.mu");

    // Rasch input streams.
    Matd xq(config_.d, n), xv(config_.d, n);
    std::vector<std::int32_t> occurrence_ids(window.steps.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const ExpandedStep& step = window.steps[static_cast<std::size_t>(i)];
      if (step.kc < 0 || step.kc >= num_kcs_ || step.question < 0 ||
          step.question >= num_questions_)
        throw Error::data("akt: step references ids outside the model's universe");
      Scalar diff = mu(0, step.question);
      Label vl = value_label(step);
      xq.col(i) = ekc.col(step.kc) + diff * dvar.col(step.kc);
      xv.col(i) = ekc.col(step.kc) + params_.value(g_name(vl)).col(0) +
                  diff * params_.value(f_name(vl)).col(step.kc);
      occurrence_ids[static_cast<std::size_t>(i)] = step.occurrence;
    }

    MaskMatrix lower = attn::mask_lower(static_cast<std::int32_t>(n));
    MaskMatrix resp_mask = config_.model_id == ModelId::akt_qm
                               ? attn::qm_mask(occurrence_ids)
                               : attn::mask_strict(static_cast<std::int32_t>(n));

    Matd x = nn::linear(params_, "in_q", xq);
    Matd v = nn::linear(params_, "in_v", xv);

    struct BlockCache {
      nn::MhaCache attn;
      Matd attn_mask;  // dropout
      Matd attn_in;
      FfnCache ffn;
    };
    std::vector<BlockCache> blocks(static_cast<std::size_t>(config_.attention_blocks));
    for (std::int32_t b = 0; b < config_.attention_blocks; ++b) {
      BlockCache& cache = blocks[static_cast<std::size_t>(b)];
      cache.attn_in = x;
      Matd att = nn::mha(params_, block_name(b) + ".attn", x, x, x, lower, heads,
                         backprop ? &cache.attn : nullptr);
      cache.attn_mask = rng ? nn::dropout_mask(hidden, n, rate, *rng) : Matd::Ones(hidden, n);
      x = x + att.cwiseProduct(cache.attn_mask);
      x = ffn(block_name(b) + ".ffn", x, rate, rng, backprop ? &cache.ffn : nullptr);
    }

    nn::MhaCache ret_cache;
    Matd ret_in = x;
    Matd ret = nn::mha(params_, "ret.attn", x, x, v, resp_mask, heads,
                       backprop ? &ret_cache : nullptr);
    Matd ret_mask = rng ? nn::dropout_mask(hidden, n, rate, *rng) : Matd::Ones(hidden, n);
    Matd h = x + ret.cwiseProduct(ret_mask);
    FfnCache ret_ffn_cache;
    h = ffn("ret.ffn", h, rate, rng, backprop ? &ret_ffn_cache : nullptr);

    Matd z1h = nn::linear(params_, "head1", h);
    Matd head_mask = rng ? nn::dropout_mask(hidden, n, rate, *rng) : Matd::Ones(hidden, n);
    Matd kept = nn::relu(z1h).cwiseProduct(head_mask);
    Matd a = nn::linear(params_, "head2", kept);  // 1 x n

    bce_sum = 0.0;
    preds.reserve(static_cast<std::size_t>(n));
    Matd da(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const ExpandedStep& step = window.steps[static_cast<std::size_t>(i)];
      Scalar s = nn::sigmoid(a(0, i));
      StepPrediction pred;
      pred.probability = nn::clamp_unit(s);
      pred.occurrence = step.occurrence;
      pred.question = step.question;
      pred.kc = step.kc;
      pred.group_index = step.group_index;
      pred.target = step.target;
      preds.push_back(pred);
      bce_sum += nn::bce(s, static_cast<Scalar>(step.target));
      da(0, i) = grad_scale * (s - static_cast<Scalar>(step.target));
    }
    if (!backprop) return preds;

    nn::ParamStore& ps = const_cast<nn::ParamStore&>(params_);
    // Head.
    Matd dkept = Matd::Zero(hidden, n);
    nn::linear_backward(ps, "head2", kept, da, &dkept);
    Matd dz1h = nn::relu_backward(z1h, dkept.cwiseProduct(head_mask));
    Matd dh = Matd::Zero(hidden, n);
    nn::linear_backward(ps, "head1", h, dz1h, &dh);

    // Retriever.
    dh = ffn_backward("ret.ffn", ret_ffn_cache, dh);
    Matd dret = dh.cwiseProduct(ret_mask);
    Matd dx = dh;  // residual into the encoder output
    Matd dv = Matd::Zero(hidden, n);
    nn::mha_backward(ps, "ret.attn", ret_cache, heads, dret, dx, dx, dv);

    // Encoder blocks in reverse.
    for (std::int32_t b = config_.attention_blocks - 1; b >= 0; --b) {
      BlockCache& cache = blocks[static_cast<std::size_t>(b)];
      dx = ffn_backward(block_name(b) + ".ffn", cache.ffn, dx);
      Matd datt = dx.cwiseProduct(cache.attn_mask);
      Matd dattn_in = dx;  // residual
      nn::mha_backward(ps, block_name(b) + ".attn", cache.attn, heads, datt, dattn_in, dattn_in,
                       dattn_in);
      dx = std::move(dattn_in);
    }

    // Input projections.
    Matd dxq = Matd::Zero(config_.d, n), dxv = Matd::Zero(config_.d, n);
    nn::linear_backward(ps, "in_q", xq, dx, &dxq);
    nn::linear_backward(ps, "in_v", xv, dv, &dxv);

    // Embedding scatter.
    Matd& d_ekc = ps.grad("embed.kc");
    Matd& d_dvar = ps.grad("embed.dvar");
    Matd& d_mu = ps.grad("embed.mu");
    for (Eigen::Index i = 0; i < n; ++i) {
      const ExpandedStep& step = window.steps[static_cast<std::size_t>(i)];
      Label vl = value_label(step);
      Scalar diff = mu(0, step.question);
      d_ekc.col(step.kc) += dxq.col(i) + dxv.col(i);
      d_dvar.col(step.kc) += diff * dxq.col(i);
      ps.grad(g_name(vl)).col(0) += dxv.col(i);
      ps.grad(f_name(vl)).col(step.kc) += diff * dxv.col(i);
      d_mu(0, step.question) += dvar.col(step.kc).dot(dxq.col(i)) +
                                params_.value(f_name(vl)).col(step.kc).dot(dxv.col(i));
    }
    return preds;
  }
};

}  // namespace

namespace detail {
std::unique_ptr<SequenceModel> make_akt(const ModelConfig& config, std::int32_t num_questions,
                                        std::int32_t num_kcs) {
  return std::make_unique<AktModel>(config, num_questions, num_kcs);
}
}  // namespace detail

}  // namespace kt::model
