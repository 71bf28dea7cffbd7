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

#ifndef KT_SRC_MODEL_DETAIL_HPP
#define KT_SRC_MODEL_DETAIL_HPP

#include <memory>

#include "kt/model.hpp"

namespace kt::model::detail {

std::unique_ptr<SequenceModel> make_dkt(const ModelConfig& config, std::int32_t num_questions,
                                        std::int32_t num_kcs);
std::unique_ptr<SequenceModel> make_akt(const ModelConfig& config, std::int32_t num_questions,
                                        std::int32_t num_kcs);

}  // namespace kt::model::detail

#endif  // KT_SRC_MODEL_DETAIL_HPP
