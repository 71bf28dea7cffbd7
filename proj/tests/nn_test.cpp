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

#include <cmath>

#include "gradcheck.hpp"
#include "kt/masks.hpp"
#include "kt/nn.hpp"

using namespace kt;
using namespace kt::nn;
using kt::testing::gradcheck;

TEST_CASE("sigmoid and cross-entropy basics") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(40.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-40.0) == doctest::Approx(0.0).epsilon(1e-12));
  // Raw sigmoid may underflow; the unit clamp is what prediction heads emit.
  CHECK(clamp_unit(sigmoid(-800.0)) > 0.0);
  CHECK(clamp_unit(1.0) < 1.0);
  CHECK(clamp_unit(0.3) == 0.3);
  CHECK(bce(0.5, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(bce(0.5, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(bce(0.999999, 1.0) < 1e-5);
  CHECK(bce(1.0, 0.0) < 30.0);  // clamped, finite
}

TEST_CASE("bce_mean skips invalid steps and rejects an empty valid set") {
  std::vector<Scalar> probs = {0.5, 0.9, 0.5};
  std::vector<std::uint8_t> targets = {1, 1, 0};
  std::vector<std::uint8_t> valid = {1, 0, 1};
  CHECK(bce_mean(probs, targets, valid) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(bce_mean(probs, targets, {0, 0, 0}), Error);
  CHECK_THROWS_AS(bce_mean(probs, {1, 1}, valid), Error);
}

TEST_CASE("masked softmax rows are simplices over open entries") {
  Rng rng(5);
  Matd scores(4, 4);
  for (Eigen::Index c = 0; c < 4; ++c)
    for (Eigen::Index r = 0; r < 4; ++r) scores(r, c) = rng.normal();
  MaskMatrix strict = attn::mask_strict(4);
  Matd p = masked_softmax(scores, strict);
  CHECK(p.row(0).sum() == 0.0);  // empty row stays exactly zero
  for (Eigen::Index i = 1; i < 4; ++i) {
    CHECK(p.row(i).sum() == doctest::Approx(1.0));
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (strict(i, j))
        CHECK(p(i, j) > 0.0);
      else
        CHECK(p(i, j) == 0.0);
    }
  }
  // Shift invariance.
  Matd shifted = masked_softmax((scores.array() + 100.0).matrix(), strict);
  CHECK((shifted - p).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear layer gradients match finite differences") {
  Rng rng(11);
  ParamStore ps;
  init_uniform(ps.create("lin.w", 3, 5), 0.5, rng);
  init_uniform(ps.create("lin.b", 3, 1), 0.5, rng);
  Matd x(5, 4), weight(3, 4);
  init_uniform(x, 1.0, rng);
  init_uniform(weight, 1.0, rng);

  auto loss = [&]() {
    Matd y = linear(ps, "lin", x);
    double value = (y.array() * weight.array()).sum() + 0.5 * (y.array() * y.array()).sum();
    Matd dy = weight + y;
    linear_backward(ps, "lin", x, dy, nullptr);
    return value;
  };
  auto result = gradcheck(ps, loss);
  CHECK(result.max_rel_error < 1e-3);
}

TEST_CASE("attention gradients match finite differences, empty row included") {
  Rng rng(23);
  const std::int32_t n = 5, width = 6, heads = 2;
  ParamStore ps;
  for (const char* t : {"a.wq", "a.wk", "a.wv", "a.wo"})
    init_uniform(ps.create(t, width, width), 0.4, rng);
  ps.create("a.bo", width, 1).setZero();
  init_uniform(ps.create("src", width, n), 0.8, rng);
  Matd weight(width, n);
  init_uniform(weight, 1.0, rng);
  MaskMatrix mask = attn::qm_mask({0, 0, 1, 2, 2});

  auto loss = [&]() {
    const Matd& x = ps.value("src");
    MhaCache cache;
    Matd out = mha(ps, "a", x, x, x, mask, heads, &cache);
    double value = (out.array() * weight.array()).sum();
    Matd dx = Matd::Zero(width, n);
    mha_backward(ps, "a", cache, heads, weight, dx, dx, dx);
    ps.grad("src") += dx;
    return value;
  };
  auto result = gradcheck(ps, loss);
  INFO(result.worst);
  CHECK(result.max_rel_error < 1e-3);

  // The first query has no open keys: its output is exactly the bias.
  const Matd& x = ps.value("src");
  Matd out = mha(ps, "a", x, x, x, mask, heads, nullptr);
  CHECK((out.col(0) - ps.value("a.bo").col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm step chain gradients match finite differences") {
  Rng rng(37);
  const Eigen::Index input = 4, hidden = 3, steps = 5;
  ParamStore ps;
  init_uniform(ps.create("cell.wx", 4 * hidden, input), 0.5, rng);
  init_uniform(ps.create("cell.wh", 4 * hidden, hidden), 0.5, rng);
  init_uniform(ps.create("cell.b", 4 * hidden, 1), 0.3, rng);
  init_uniform(ps.create("xs", input, steps), 1.0, rng);
  Matd weight(hidden, steps);
  init_uniform(weight, 1.0, rng);

  auto loss = [&]() {
    LstmState state;
    state.reset(hidden);
    std::vector<LstmStepCache> caches(steps);
    double value = 0.0;
    for (Eigen::Index t = 0; t < steps; ++t) {
      lstm_step(ps, "cell", ps.value("xs").col(t), state, &caches[static_cast<std::size_t>(t)]);
      value += state.h.dot(weight.col(t));
    }
    Vecd dh = Vecd::Zero(hidden), dc = Vecd::Zero(hidden);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      dh += weight.col(t);
      Vecd dx = Vecd::Zero(input), dh_prev = Vecd::Zero(hidden), dc_prev = Vecd::Zero(hidden);
      lstm_step_backward(ps, "cell", caches[static_cast<std::size_t>(t)], dh, dc, dx, dh_prev,
                         dc_prev);
      ps.grad("xs").col(t) += dx;
      dh = dh_prev;
      dc = dc_prev;
    }
    return value;
  };
  auto result = gradcheck(ps, loss);
  INFO(result.worst);
  CHECK(result.max_rel_error < 1e-3);
}

TEST_CASE("adam first step moves by roughly the learning rate against the gradient sign") {
  ParamStore ps;
  Matd& w = ps.create("w", 2, 1);
  w << 1.0, -2.0;
  ps.grad("w") << 0.5, -0.25;
  Adam opt(0.01);
  opt.step(ps);
  CHECK(w(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(w(1, 0) == doctest::Approx(-2.0 + 0.01).epsilon(1e-4));
  CHECK(opt.updates() == 1);
}

TEST_CASE("dropout masks are inverted and deterministic under a seed") {
  Rng a(3), b(3);
  Matd ma = dropout_mask(8, 8, 0.5, a);
  Matd mb = dropout_mask(8, 8, 0.5, b);
  CHECK(ma == mb);
  for (Eigen::Index c = 0; c < 8; ++c)
    for (Eigen::Index r = 0; r < 8; ++r) CHECK((ma(r, c) == 0.0 || ma(r, c) == 2.0));
  CHECK(dropout_mask(4, 4, 0.0, a) == Matd::Ones(4, 4));
  CHECK_THROWS_AS(dropout_mask(2, 2, 1.0, a), Error);

  Rng stat(77);
  Matd big = dropout_mask(100, 100, 0.2, stat);
  CHECK(big.mean() == doctest::Approx(1.0).epsilon(0.03));
}
