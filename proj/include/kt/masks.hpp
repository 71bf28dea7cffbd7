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

#ifndef KT_MASKS_HPP
#define KT_MASKS_HPP

#include <utility>
#include <vector>

#include "kt/errors.hpp"
#include "kt/types.hpp"

namespace kt::attn {

// Entry 1 means attention from position i (row) to position j (column) is
// permitted. Structural zeros, applied before softmax.

// Question stream: a position may attend to itself and its past.
inline MaskMatrix mask_lower(std::int32_t n) {
  if (n < 1) throw Error::data("mask_lower: need n >= 1");
  MaskMatrix m = MaskMatrix::Zero(n, n);
  for (std::int32_t i = 0; i < n; ++i)
    for (std::int32_t j = 0; j <= i; ++j) m(i, j) = 1;
  return m;
}

// Response stream: strictly the past, the diagonal stays closed so a
// position never sees its own response.
inline MaskMatrix mask_strict(std::int32_t n) {
  if (n < 1) throw Error::data("mask_strict: need n >= 1");
  MaskMatrix m = MaskMatrix::Zero(n, n);
  for (std::int32_t i = 0; i < n; ++i)
    for (std::int32_t j = 0; j < i; ++j) m(i, j) = 1;
  return m;
}

inline std::pair<MaskMatrix, MaskMatrix> akt_masks(std::int32_t n) {
  return {mask_lower(n), mask_strict(n)};
}

// Question-masked response stream: past positions only, and never another
// expansion step of the same question occurrence.
inline MaskMatrix qm_mask(const std::vector<std::int32_t>& group_ids) {
  std::int32_t n = static_cast<std::int32_t>(group_ids.size());
  if (n < 1) throw Error::data("qm_mask: need n >= 1");
  MaskMatrix m = MaskMatrix::Zero(n, n);
  for (std::int32_t i = 0; i < n; ++i)
    for (std::int32_t j = 0; j < i; ++j)
      if (group_ids[static_cast<std::size_t>(i)] != group_ids[static_cast<std::size_t>(j)])
        m(i, j) = 1;
  return m;
}

}  // namespace kt::attn

#endif  // KT_MASKS_HPP
