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

#ifndef KT_TESTS_GRADCHECK_HPP
#define KT_TESTS_GRADCHECK_HPP

#include <functional>
#include <string>

#include "kt/params.hpp"

namespace kt::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "tensor(r,c)" of the worst entry
  std::int64_t entries = 0;
};

// Central differences against the analytic gradients stored for every tensor
// of the store. loss() must recompute forward+backward from the current
// parameter values and leave gradients in place; this helper zeroes
// gradients, calls loss() once to populate them, then perturbs entries.
inline GradCheckResult gradcheck(nn::ParamStore& params, const std::function<double()>& loss,
                                 double step = 1e-4) {
  params.zero_grad();
  (void)loss();
  GradCheckResult result;
  for (const std::string& name : params.names()) {
    Matd analytic = params.grad(name);
    Matd& value = params.value(name);
    for (Eigen::Index c = 0; c < value.cols(); ++c) {
      for (Eigen::Index r = 0; r < value.rows(); ++r) {
        double saved = value(r, c);
        value(r, c) = saved + step;
        params.zero_grad();
        double up = loss();
        value(r, c) = saved - step;
        params.zero_grad();
        double down = loss();
        value(r, c) = saved;
        double numeric = (up - down) / (2.0 * step);
        double a = analytic(r, c);
        double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        ++result.entries;
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst = name + "(" + std::to_string(r) + "," + std::to_string(c) + ")";
        }
      }
    }
  }
  params.zero_grad();
  (void)loss();  // leave analytic gradients in place for further inspection
  return result;
}

}  // namespace kt::testing

#endif  // KT_TESTS_GRADCHECK_HPP
