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

#ifndef KT_CHECKPOINT_HPP
#define KT_CHECKPOINT_HPP

#include <memory>
#include <string>

#include "kt/data.hpp"
#include "kt/model.hpp"

namespace kt::model {

// Self-describing archive: magic, a JSON header (config, id maps, tensor
// directory), then raw 64-bit tensor payloads in directory order. A reload
// reproduces predictions bit for bit.
void save_checkpoint(const std::string& path, const SequenceModel& model,
                     const data::IdMap& question_ids, const data::IdMap& kc_ids);

std::unique_ptr<SequenceModel> load_checkpoint(const std::string& path,
                                               data::IdMap* question_ids = nullptr,
                                               data::IdMap* kc_ids = nullptr);

}  // namespace kt::model

#endif  // KT_CHECKPOINT_HPP
