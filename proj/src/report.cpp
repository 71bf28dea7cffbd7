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

#include "kt/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kt/errors.hpp"

namespace kt::report {

namespace {

std::string fixed4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error::io("failed writing '" + path + "'");
}

}  // namespace

std::string comparison_csv(const harness::ExperimentSummary& summary) {
  std::ostringstream out;
  out << "model,test_method,auc_mean,auc_std,accuracy_mean,accuracy_std,folds\n";
  for (const auto& m : summary.models)
    out << m.model << ',' << m.test_method << ',' << fixed4(m.auc_mean) << ','
        << fixed4(m.auc_std) << ',' << fixed4(m.accuracy_mean) << ',' << fixed4(m.accuracy_std)
        << ',' << m.fold_aucs.size() << '\n';
  return out.str();
}

std::string comparison_markdown(const harness::ExperimentSummary& summary) {
  std::ostringstream out;
  out << "| model | test method | AUC | AUC sd | accuracy | accuracy sd |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& m : summary.models)
    out << "| " << m.model << " | " << m.test_method << " | " << fixed4(m.auc_mean) << " | "
        << fixed4(m.auc_std) << " | " << fixed4(m.accuracy_mean) << " | "
        << fixed4(m.accuracy_std) << " |\n";
  return out.str();
}

std::string auc_bar_svg(const harness::ExperimentSummary& summary) {
  const int bar_h = 22, gap = 8, label_w = 110, chart_w = 420, pad = 10;
  const int n = static_cast<int>(summary.models.size());
  const int height = pad * 2 + n * bar_h + std::max(0, n - 1) * gap;
  const int width = label_w + chart_w + 70;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"monospace\" font-size=\"12\">\n";
  for (int i = 0; i < n; ++i) {
    const auto& m = summary.models[static_cast<std::size_t>(i)];
    int y = pad + i * (bar_h + gap);
    int w = static_cast<int>(std::clamp(m.auc_mean, 0.0, 1.0) * chart_w + 0.5);
    out << "  <text x=\"" << pad << "\" y=\"" << y + bar_h - 7 << "\">" << m.model << "</text>\n";
    out << "  <rect x=\"" << label_w << "\" y=\"" << y << "\" width=\"" << w << "\" height=\""
        << bar_h << "\" fill=\"#4878a8\"/>\n";
    out << "  <text x=\"" << label_w + w + 6 << "\" y=\"" << y + bar_h - 7 << "\">"
        << fixed4(m.auc_mean) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_comparison(const harness::ExperimentSummary& summary, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto base = std::filesystem::path(dir);
  write_text((base / "table.csv").string(), comparison_csv(summary));
  write_text((base / "table.md").string(), comparison_markdown(summary));
  write_text((base / "auc.svg").string(), auc_bar_svg(summary));
}

}  // namespace kt::report
