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

#include "kt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "kt/errors.hpp"

namespace kt::eval {

namespace {

using expand::ExpandedSequence;
using model::StepPrediction;

TraceEntry entry_from(const std::string& student, const StepPrediction& pred,
                      std::int32_t group_size) {
  TraceEntry entry;
  entry.student = student;
  entry.occurrence = pred.occurrence;
  entry.question = pred.question;
  entry.kc = pred.kc;
  entry.group_index = pred.group_index;
  entry.group_size = group_size;
  entry.probability = pred.probability;
  entry.target = pred.target;
  return entry;
}

}  // namespace

const char* trace_level_name(TraceLevel level) {
  return level == TraceLevel::kc_step ? "kc_step" : "question";
}

const char* eval_method_name(EvalMethod method) {
  switch (method) {
    case EvalMethod::one_by_one: return "one_by_one";
    case EvalMethod::all_in_one: return "all_in_one";
    case EvalMethod::aggregated_one_by_one: return "aggregated_one_by_one";
  }
  return "unknown";
}

EvalMethod parse_eval_method(const std::string& name) {
  if (name == "one_by_one") return EvalMethod::one_by_one;
  if (name == "all_in_one") return EvalMethod::all_in_one;
  if (name == "aggregated_one_by_one") return EvalMethod::aggregated_one_by_one;
  throw Error::usage("unknown evaluation method '" + name +
                     "' (expected one_by_one, all_in_one, or aggregated_one_by_one)");
}

PredictionTrace eval_one_by_one(const model::SequenceModel& model,
                                const std::vector<ExpandedSequence>& windows) {
  PredictionTrace trace;
  trace.level = model::question_level(model.config().model_id) ? TraceLevel::question
                                                               : TraceLevel::kc_step;
  for (const ExpandedSequence& window : windows) {
    auto preds = model.forward(window);
    if (trace.level == TraceLevel::kc_step) {
      for (std::size_t i = 0; i < preds.size(); ++i)
        trace.entries.push_back(entry_from(window.student, preds[i], window.steps[i].group_size));
    } else {
      for (const StepPrediction& pred : preds)
        trace.entries.push_back(entry_from(window.student, pred, 1));
    }
  }
  return trace;
}

PredictionTrace aggregate_by_question(const PredictionTrace& trace) {
  if (trace.level == TraceLevel::question) return trace;
  PredictionTrace out;
  out.level = TraceLevel::question;
  std::size_t i = 0;
  while (i < trace.entries.size()) {
    const TraceEntry& first = trace.entries[i];
    std::size_t run = i;
    Scalar sum = 0.0;
    while (run < trace.entries.size() && trace.entries[run].student == first.student &&
           trace.entries[run].occurrence == first.occurrence) {
      const TraceEntry& e = trace.entries[run];
      if (e.group_size != first.group_size ||
          e.group_index != static_cast<std::int32_t>(run - i))
        throw Error::data("trace group for occurrence " + std::to_string(first.occurrence) +
                          " of student '" + first.student + "' is out of order");
      sum += e.probability;
      ++run;
    }
    std::size_t got = run - i;
    if (got != static_cast<std::size_t>(first.group_size))
      throw Error::data("trace group for occurrence " + std::to_string(first.occurrence) +
                        " of student '" + first.student + "' has " + std::to_string(got) +
                        " of " + std::to_string(first.group_size) + " steps");
    TraceEntry merged = first;
    merged.kc = -1;
    merged.group_index = 0;
    merged.group_size = 1;
    merged.probability = sum / static_cast<Scalar>(got);
    out.entries.push_back(std::move(merged));
    i = run;
  }
  return out;
}

PredictionTrace eval_all_in_one(const model::SequenceModel& model,
                                const std::vector<ExpandedSequence>& windows,
                                std::int64_t* branches) {
  PredictionTrace out;
  out.level = TraceLevel::question;
  for (const ExpandedSequence& window : windows) {
    auto preds = model.all_in_one(window, branches);
    std::size_t i = 0;
    while (i < preds.size()) {
      std::size_t run = i;
      Scalar sum = 0.0;
      while (run < preds.size() && preds[run].occurrence == preds[i].occurrence) {
        sum += preds[run].probability;
        ++run;
      }
      TraceEntry entry = entry_from(window.student, preds[i], 1);
      entry.kc = -1;
      entry.group_index = 0;
      entry.probability = sum / static_cast<Scalar>(run - i);
      out.entries.push_back(std::move(entry));
      i = run;
    }
  }
  return out;
}

double auc(const std::vector<Scalar>& probabilities, const std::vector<std::uint8_t>& targets) {
  if (probabilities.size() != targets.size())
    throw Error::data("auc: probabilities and targets differ in length");
  std::int64_t positives = 0;
  for (std::uint8_t t : targets) positives += t ? 1 : 0;
  std::int64_t negatives = static_cast<std::int64_t>(targets.size()) - positives;
  if (positives == 0 || negatives == 0)
    throw Error::data("auc undefined: needs at least one positive and one negative target");

  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probabilities[a] < probabilities[b];
  });

  // average ranks over tie runs, then the rank-sum formula
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && probabilities[order[j]] == probabilities[order[i]]) ++j;
    double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (targets[order[k]]) positive_rank_sum += rank;
    i = j;
  }
  double p = static_cast<double>(positives), n = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double accuracy(const std::vector<Scalar>& probabilities, const std::vector<std::uint8_t>& targets,
                double threshold) {
  if (probabilities.size() != targets.size())
    throw Error::data("accuracy: probabilities and targets differ in length");
  if (probabilities.empty()) throw Error::data("accuracy over an empty population");
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    int predicted = probabilities[i] >= threshold ? 1 : 0;
    if (predicted == static_cast<int>(targets[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probabilities.size());
}

EvalReport summarize(const PredictionTrace& trace, EvalMethod method) {
  if (trace.entries.empty()) throw Error::data("cannot summarize an empty trace");
  std::vector<Scalar> probs;
  std::vector<std::uint8_t> targets;
  probs.reserve(trace.entries.size());
  targets.reserve(trace.entries.size());
  for (const TraceEntry& e : trace.entries) {
    probs.push_back(e.probability);
    targets.push_back(e.target);
  }
  EvalReport report;
  report.method = method;
  report.level = trace.level;
  report.population = static_cast<std::int64_t>(trace.entries.size());
  report.auc = auc(probs, targets);
  report.accuracy = accuracy(probs, targets);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j{{"version", 1},
                   {"method", eval_method_name(method)},
                   {"level", trace_level_name(level)},
                   {"auc", auc},
                   {"accuracy", accuracy},
                   {"population", population}};
  return j.dump();
}

std::string LeakageReport::to_json() const {
  nlohmann::json j{{"version", 1},
                   {"max_shift", max_shift},
                   {"sampled_occurrences", sampled_occurrences},
                   {"verdict", verdict()}};
  return j.dump();
}

LeakageReport leakage_probe(const model::SequenceModel& model,
                            const std::vector<ExpandedSequence>& windows, std::int64_t samples,
                            std::uint64_t seed) {
  if (samples < 1) throw Error::data("leakage probe needs a positive sample count");
  struct Site {
    std::size_t window;
    std::int32_t occurrence;
  };
  std::vector<Site> sites;
  for (std::size_t w = 0; w < windows.size(); ++w)
    for (const auto& step : windows[w].steps)
      if (step.group_index == 0 && step.group_size >= 2)
        sites.push_back({w, step.occurrence});
  if (sites.empty())
    throw Error::data("leakage probe inconclusive: no multi-KC occurrences in the windows");

  Rng rng(seed);
  shuffle(sites, rng);
  if (static_cast<std::int64_t>(sites.size()) > samples)
    sites.resize(static_cast<std::size_t>(samples));
  std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
    return a.window != b.window ? a.window < b.window : a.occurrence < b.occurrence;
  });

  LeakageReport report;
  report.sampled_occurrences = static_cast<std::int64_t>(sites.size());
  std::size_t cached_window = windows.size();
  std::vector<StepPrediction> base;
  for (const Site& site : sites) {
    if (site.window != cached_window) {
      base = model.forward(windows[site.window]);
      cached_window = site.window;
    }
    ExpandedSequence flipped = windows[site.window];
    for (auto& step : flipped.steps) {
      if (step.occurrence != site.occurrence) continue;
      step.target ^= 1;
      if (step.input_label != expand::Label::mask)
        step.input_label = step.target ? expand::Label::correct : expand::Label::incorrect;
    }
    auto perturbed = model.forward(flipped);
    for (std::size_t i = 0; i < base.size(); ++i)
      if (base[i].occurrence == site.occurrence)
        report.max_shift =
            std::max(report.max_shift, std::abs(base[i].probability - perturbed[i].probability));
  }
  return report;
}

void write_trace(const PredictionTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error::io("cannot write trace '" + path + "'");
  out << "# ktlab-trace v1 level=" << trace_level_name(trace.level) << "\n";
  out << "# student occurrence question kc group_index group_size probability target\n";
  out << std::setprecision(17);
  for (const TraceEntry& e : trace.entries)
    out << e.student << ' ' << e.occurrence << ' ' << e.question << ' ' << e.kc << ' '
        << e.group_index << ' ' << e.group_size << ' ' << e.probability << ' '
        << static_cast<int>(e.target) << "\n";
  if (!out) throw Error::io("short write to trace '" + path + "'");
}

PredictionTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open trace '" + path + "'");
  std::string header;
  if (!std::getline(in, header) || header.rfind("# ktlab-trace v1 level=", 0) != 0)
    throw Error::data("'" + path + "' is not a v1 trace file");
  PredictionTrace trace;
  std::string level = header.substr(header.find("level=") + 6);
  if (level == "kc_step")
    trace.level = TraceLevel::kc_step;
  else if (level == "question")
    trace.level = TraceLevel::question;
  else
    throw Error::data("unknown trace level '" + level + "'");

  std::string line;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    TraceEntry e;
    int target = 0;
    if (!(fields >> e.student >> e.occurrence >> e.question >> e.kc >> e.group_index >>
          e.group_size >> e.probability >> target))
      throw Error::data("trace '" + path + "' line " + std::to_string(line_no) + ": bad record");
    e.target = static_cast<std::uint8_t>(target);
    trace.entries.push_back(std::move(e));
  }
  return trace;
}

}  // namespace kt::eval
