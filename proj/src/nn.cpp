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

#include "kt/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kt/errors.hpp"

namespace kt::nn {

namespace {
constexpr Scalar kProbFloor = 1e-12;

Scalar clamp_prob(Scalar p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }
}  // namespace

Scalar bce(Scalar p, Scalar target) {
  p = clamp_prob(p);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

Scalar bce_dp(Scalar p, Scalar target) {
  p = clamp_prob(p);
  return (p - target) / (p * (1.0 - p));
}

Scalar bce_mean(const std::vector<Scalar>& probs, const std::vector<std::uint8_t>& targets,
                const std::vector<std::uint8_t>& valid) {
  if (probs.size() != targets.size() || probs.size() != valid.size())
    throw Error::data("bce_mean: misaligned lengths");
  Scalar sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!valid[i]) continue;
    sum += bce(probs[i], static_cast<Scalar>(targets[i]));
    ++n;
  }
  if (n == 0) throw Error::data("bce_mean: no valid steps");
  return sum / static_cast<Scalar>(n);
}

Matd dropout_mask(Eigen::Index rows, Eigen::Index cols, Scalar rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error::data("dropout rate must be in [0, 1)");
  if (rate == 0.0) return Matd::Ones(rows, cols);
  Matd mask(rows, cols);
  Scalar keep = 1.0 - rate;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask;
}

Matd linear(const ParamStore& params, const std::string& prefix, const Matd& x) {
  const Matd& w = params.value(prefix + ".w");
  const Matd& b = params.value(prefix + ".b");
  return (w * x).colwise() + b.col(0);
}

void linear_backward(ParamStore& params, const std::string& prefix, const Matd& x,
                     const Matd& dout, Matd* dx) {
  params.grad(prefix + ".w") += dout * x.transpose();
  params.grad(prefix + ".b").col(0) += dout.rowwise().sum();
  if (dx) *dx += params.value(prefix + ".w").transpose() * dout;
}

Matd relu(const Matd& x) { return x.cwiseMax(0.0); }

Matd relu_backward(const Matd& x, const Matd& dout) {
  return (x.array() > 0.0).select(dout, 0.0);
}

Matd masked_softmax(const Matd& scores, const MaskMatrix& mask) {
  if (scores.rows() != mask.rows() || scores.cols() != mask.cols())
    throw Error::data("masked_softmax: shape mismatch");
  Matd probs = Matd::Zero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < scores.cols(); ++j)
      if (mask(i, j)) best = std::max(best, scores(i, j));
    if (best == -std::numeric_limits<Scalar>::infinity()) continue;  // fully closed row
    Scalar z = 0.0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (!mask(i, j)) continue;
      Scalar e = std::exp(scores(i, j) - best);
      probs(i, j) = e;
      z += e;
    }
    for (Eigen::Index j = 0; j < scores.cols(); ++j)
      if (mask(i, j)) probs(i, j) /= z;
  }
  return probs;
}

Matd masked_softmax_backward(const Matd& probs, const Matd& dprobs) {
  Matd dscores = Matd::Zero(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Scalar dot = probs.row(i).dot(dprobs.row(i));
    dscores.row(i) = (probs.row(i).array() * (dprobs.row(i).array() - dot)).matrix();
  }
  return dscores;
}

Matd mha(const ParamStore& params, const std::string& prefix, const Matd& q_src,
         const Matd& k_src, const Matd& v_src, const MaskMatrix& mask, std::int32_t heads,
         MhaCache* cache) {
  const Matd& wq = params.value(prefix + ".wq");
  const Matd& wk = params.value(prefix + ".wk");
  const Matd& wv = params.value(prefix + ".wv");
  Eigen::Index width = wq.rows();
  if (heads < 1 || width % heads != 0) throw Error::data("mha: heads must divide width");
  Eigen::Index dh = width / heads;
  Eigen::Index n = q_src.cols();

  Matd q = wq * q_src;
  Matd k = wk * k_src;
  Matd v = wv * v_src;
  Matd concat(width, n);
  std::vector<Matd> probs(static_cast<std::size_t>(heads));
  Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(dh));
  for (std::int32_t h = 0; h < heads; ++h) {
    auto qh = q.middleRows(h * dh, dh);
    auto kh = k.middleRows(h * dh, dh);
    auto vh = v.middleRows(h * dh, dh);
    Matd scores = (qh.transpose() * kh) * scale;
    probs[static_cast<std::size_t>(h)] = masked_softmax(scores, mask);
    concat.middleRows(h * dh, dh) = vh * probs[static_cast<std::size_t>(h)].transpose();
  }
  Matd out = (params.value(prefix + ".wo") * concat).colwise() +
             params.value(prefix + ".bo").col(0);
  if (cache) {
    cache->q_src = q_src;
    cache->k_src = k_src;
    cache->v_src = v_src;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return out;
}

void mha_backward(ParamStore& params, const std::string& prefix, const MhaCache& cache,
                  std::int32_t heads, const Matd& dout, Matd& dq_src, Matd& dk_src,
                  Matd& dv_src) {
  Eigen::Index width = cache.q.rows();
  Eigen::Index dh = width / heads;
  Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(dh));

  params.grad(prefix + ".wo") += dout * cache.concat.transpose();
  params.grad(prefix + ".bo").col(0) += dout.rowwise().sum();
  Matd dconcat = params.value(prefix + ".wo").transpose() * dout;

  Matd dq = Matd::Zero(cache.q.rows(), cache.q.cols());
  Matd dk = Matd::Zero(cache.k.rows(), cache.k.cols());
  Matd dv = Matd::Zero(cache.v.rows(), cache.v.cols());
  for (std::int32_t h = 0; h < heads; ++h) {
    const Matd& p = cache.probs[static_cast<std::size_t>(h)];
    auto dch = dconcat.middleRows(h * dh, dh);
    auto qh = cache.q.middleRows(h * dh, dh);
    auto kh = cache.k.middleRows(h * dh, dh);
    auto vh = cache.v.middleRows(h * dh, dh);
    dv.middleRows(h * dh, dh) += dch * p;
    Matd dp = dch.transpose() * vh;
    Matd dscores = masked_softmax_backward(p, dp);
    dq.middleRows(h * dh, dh) += (kh * dscores.transpose()) * scale;
    dk.middleRows(h * dh, dh) += (qh * dscores) * scale;
  }
  params.grad(prefix + ".wq") += dq * cache.q_src.transpose();
  params.grad(prefix + ".wk") += dk * cache.k_src.transpose();
  params.grad(prefix + ".wv") += dv * cache.v_src.transpose();
  dq_src += params.value(prefix + ".wq").transpose() * dq;
  dk_src += params.value(prefix + ".wk").transpose() * dk;
  dv_src += params.value(prefix + ".wv").transpose() * dv;
}

void lstm_step(const ParamStore& params, const std::string& prefix, const Vecd& x,
               LstmState& state, LstmStepCache* cache) {
  const Matd& wx = params.value(prefix + ".wx");
  const Matd& wh = params.value(prefix + ".wh");
  const Matd& b = params.value(prefix + ".b");
  Eigen::Index hidden = wh.cols();

  Vecd z = wx * x + wh * state.h + b.col(0);
  Vecd gates(4 * hidden);
  for (Eigen::Index r = 0; r < 3 * hidden; ++r) gates(r) = sigmoid(z(r));
  for (Eigen::Index r = 3 * hidden; r < 4 * hidden; ++r) gates(r) = std::tanh(z(r));
  auto gi = gates.segment(0, hidden);
  auto gf = gates.segment(hidden, hidden);
  auto go = gates.segment(2 * hidden, hidden);
  auto gg = gates.segment(3 * hidden, hidden);

  Vecd c = gf.cwiseProduct(state.c) + gi.cwiseProduct(gg);
  Vecd ctanh = c.array().tanh();
  Vecd h = go.cwiseProduct(ctanh);
  if (cache) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->gates = gates;
    cache->c = c;
    cache->ctanh = ctanh;
  }
  state.h = std::move(h);
  state.c = std::move(c);
}

void lstm_step_backward(ParamStore& params, const std::string& prefix, const LstmStepCache& cache,
                        const Vecd& dh, const Vecd& dc, Vecd& dx, Vecd& dh_prev, Vecd& dc_prev) {
  Eigen::Index hidden = cache.c.size();
  auto gi = cache.gates.segment(0, hidden);
  auto gf = cache.gates.segment(hidden, hidden);
  auto go = cache.gates.segment(2 * hidden, hidden);
  auto gg = cache.gates.segment(3 * hidden, hidden);

  Vecd dct = dc + dh.cwiseProduct(go).cwiseProduct(
                      (1.0 - cache.ctanh.array().square()).matrix());
  Vecd dz(4 * hidden);
  dz.segment(0, hidden) = dct.cwiseProduct(gg).cwiseProduct(gi).cwiseProduct(
      (1.0 - gi.array()).matrix());
  dz.segment(hidden, hidden) = dct.cwiseProduct(cache.c_prev).cwiseProduct(gf).cwiseProduct(
      (1.0 - gf.array()).matrix());
  dz.segment(2 * hidden, hidden) = dh.cwiseProduct(cache.ctanh).cwiseProduct(go).cwiseProduct(
      (1.0 - go.array()).matrix());
  dz.segment(3 * hidden, hidden) = dct.cwiseProduct(gi).cwiseProduct(
      (1.0 - gg.array().square()).matrix());

  params.grad(prefix + ".wx") += dz * cache.x.transpose();
  params.grad(prefix + ".wh") += dz * cache.h_prev.transpose();
  params.grad(prefix + ".b").col(0) += dz;
  dx += params.value(prefix + ".wx").transpose() * dz;
  dh_prev += params.value(prefix + ".wh").transpose() * dz;
  dc_prev += dct.cwiseProduct(gf);
}

}  // namespace kt::nn
