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

#include "kt/params.hpp"

#include <cmath>

#include "kt/errors.hpp"

namespace kt::nn {

Matd& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (has(name)) throw Error::data("parameter '" + name + "' already exists");
  if (rows < 1 || cols < 1) throw Error::data("parameter '" + name + "' needs positive shape");
  index_[name] = slots_.size();
  names_.push_back(name);
  Slot slot;
  slot.value = Matd::Zero(rows, cols);
  slot.grad = Matd::Zero(rows, cols);
  slots_.push_back(std::move(slot));
  return slots_.back().value;
}

std::size_t ParamStore::slot_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error::data("unknown parameter '" + name + "'");
  return it->second;
}

Matd& ParamStore::value(const std::string& name) { return slots_[slot_of(name)].value; }
const Matd& ParamStore::value(const std::string& name) const { return slots_[slot_of(name)].value; }
Matd& ParamStore::grad(const std::string& name) { return slots_[slot_of(name)].grad; }
const Matd& ParamStore::grad(const std::string& name) const { return slots_[slot_of(name)].grad; }

std::int64_t ParamStore::scalar_count() const {
  std::int64_t n = 0;
  for (const Slot& slot : slots_) n += static_cast<std::int64_t>(slot.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (Slot& slot : slots_) slot.grad.setZero();
}

void init_uniform(Matd& m, Scalar bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
}

void Adam::step(ParamStore& params) {
  ++t_;
  Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (const std::string& name : params.names()) {
    Matd& value = params.value(name);
    const Matd& g = params.grad(name);
    auto [it, fresh] = moments_.try_emplace(name, std::pair<Matd, Matd>{});
    if (fresh) {
      it->second.first = Matd::Zero(value.rows(), value.cols());
      it->second.second = Matd::Zero(value.rows(), value.cols());
    }
    Matd& m = it->second.first;
    Matd& v = it->second.second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    value.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

}  // namespace kt::nn
