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

#ifndef KT_ERRORS_HPP
#define KT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kt {

// Error categories double as process exit codes (0 = success, 2 = usage).
enum class ErrorCategory : int {
  usage = 2,
  io = 3,
  data = 4,
  divergence = 5,
  fairness = 6,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
    case ErrorCategory::divergence: return "training-divergence";
    case ErrorCategory::fairness: return "fairness-violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

  static Error usage(const std::string& m) { return Error(ErrorCategory::usage, m); }
  static Error io(const std::string& m) { return Error(ErrorCategory::io, m); }
  static Error data(const std::string& m) { return Error(ErrorCategory::data, m); }
  static Error divergence(const std::string& m) { return Error(ErrorCategory::divergence, m); }
  static Error fairness(const std::string& m) { return Error(ErrorCategory::fairness, m); }

 private:
  ErrorCategory category_;
};

}  // namespace kt

#endif  // KT_ERRORS_HPP
