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

#ifndef KT_REPORT_HPP
#define KT_REPORT_HPP

#include <string>

#include "kt/harness.hpp"

namespace kt::report {

// Deterministic renderings of a cross-model summary: fixed column order,
// four decimals, no timestamps, so a rerun is byte-identical.
std::string comparison_csv(const harness::ExperimentSummary& summary);
std::string comparison_markdown(const harness::ExperimentSummary& summary);
std::string auc_bar_svg(const harness::ExperimentSummary& summary);

// Writes table.csv, table.md, and auc.svg under dir.
void write_comparison(const harness::ExperimentSummary& summary, const std::string& dir);

}  // namespace kt::report

#endif  // KT_REPORT_HPP
