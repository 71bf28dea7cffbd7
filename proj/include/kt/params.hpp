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

#ifndef KT_PARAMS_HPP
#define KT_PARAMS_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kt/types.hpp"

namespace kt::nn {

// Named dense tensors with paired gradient slots. Iteration follows creation
// order, which fixes initialization draws, optimizer sweeps, and checkpoint
// layout.
class ParamStore {
 public:
  Matd& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Matd& value(const std::string& name);
  const Matd& value(const std::string& name) const;
  Matd& grad(const std::string& name);
  const Matd& grad(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::int64_t scalar_count() const;
  void zero_grad();

 private:
  struct Slot {
    Matd value;
    Matd grad;
  };

  std::size_t slot_of(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> index_;
};

void init_uniform(Matd& m, Scalar bound, Rng& rng);

class Adam {
 public:
  explicit Adam(Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999, Scalar eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // One update from the gradients currently held in the store.
  void step(ParamStore& params);

  std::int64_t updates() const { return t_; }

 private:
  Scalar lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, std::pair<Matd, Matd>> moments_;
};

}  // namespace kt::nn

#endif  // KT_PARAMS_HPP
