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

#ifndef KT_NN_HPP
#define KT_NN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kt/params.hpp"
#include "kt/types.hpp"

// Kernels with explicit backward passes. Convention throughout: features in
// rows, sequence positions in columns; mask entry (i, j) gates attention of
// query position i onto key position j.
namespace kt::nn {

inline Scalar sigmoid(Scalar x) {
  if (x >= 0) {
    Scalar e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  Scalar e = std::exp(x);
  return e / (1.0 + e);
}

// Pulls a probability strictly inside (0, 1); prediction heads emit this.
inline Scalar clamp_unit(Scalar p) {
  constexpr Scalar floor = 1e-12;
  return std::min(std::max(p, floor), 1.0 - floor);
}

// Binary cross-entropy of a probability; clamped away from the log poles.
Scalar bce(Scalar p, Scalar target);
// d bce / d p at the same clamp.
Scalar bce_dp(Scalar p, Scalar target);

// Mean BCE over steps with valid[i] != 0; pad steps carry valid 0.
Scalar bce_mean(const std::vector<Scalar>& probs, const std::vector<std::uint8_t>& targets,
                const std::vector<std::uint8_t>& valid);

// Inverted-dropout mask: entries are 0 or 1/(1-rate). rate 0 gives all ones.
Matd dropout_mask(Eigen::Index rows, Eigen::Index cols, Scalar rate, Rng& rng);

// y = w x + b with w: (out, in), b: (out, 1), x: (in, n).
Matd linear(const ParamStore& params, const std::string& prefix, const Matd& x);
// Accumulates parameter gradients; adds w^T dout into *dx when given.
void linear_backward(ParamStore& params, const std::string& prefix, const Matd& x,
                     const Matd& dout, Matd* dx);

Matd relu(const Matd& x);
Matd relu_backward(const Matd& x, const Matd& dout);

// Row-wise softmax over entries with mask 1. Masked entries are exactly zero;
// a row with no open entries is all zero.
Matd masked_softmax(const Matd& scores, const MaskMatrix& mask);
Matd masked_softmax_backward(const Matd& probs, const Matd& dprobs);

struct MhaCache {
  Matd q_src, k_src, v_src;
  Matd q, k, v;            // projected, (width, n)
  std::vector<Matd> probs; // per head, (n, n)
  Matd concat;             // head outputs stacked, (width, n)
};

// Multi-head attention. Parameters under prefix: .wq .wk .wv (width, width),
// .wo (width, width), .bo (width, 1). heads must divide width.
Matd mha(const ParamStore& params, const std::string& prefix, const Matd& q_src,
         const Matd& k_src, const Matd& v_src, const MaskMatrix& mask, std::int32_t heads,
         MhaCache* cache);
// Accumulates parameter gradients and adds input gradients into dq/dk/dv
// (shapes of the sources; any may be the same matrix for self-attention).
void mha_backward(ParamStore& params, const std::string& prefix, const MhaCache& cache,
                  std::int32_t heads, const Matd& dout, Matd& dq_src, Matd& dk_src,
                  Matd& dv_src);

struct LstmState {
  Vecd h, c;
  void reset(Eigen::Index hidden) {
    h = Vecd::Zero(hidden);
    c = Vecd::Zero(hidden);
  }
};

struct LstmStepCache {
  Vecd x, h_prev, c_prev;
  Vecd gates;  // post-activation, stacked (i, f, o, g)
  Vecd c, ctanh;
};

// One step of the cell. Parameters under prefix: .wx (4H, D), .wh (4H, H),
// .b (4H, 1). Advances state in place.
void lstm_step(const ParamStore& params, const std::string& prefix, const Vecd& x,
               LstmState& state, LstmStepCache* cache);
// Consumes dh/dc for this step's outputs, emits dx and the gradients for the
// previous step's outputs (accumulated into dh_prev/dc_prev).
void lstm_step_backward(ParamStore& params, const std::string& prefix, const LstmStepCache& cache,
                        const Vecd& dh, const Vecd& dc, Vecd& dx, Vecd& dh_prev, Vecd& dc_prev);

}  // namespace kt::nn

#endif  // KT_NN_HPP
