// Copyright 2026 The qmat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace qmat {

/// Coarse error categories; these map one-to-one onto CLI exit codes and the
/// C API status values.
enum class ErrorCategory {
    Parse = 2,     // syntax errors, unknown matrix/function names
    Dim = 3,       // dimension and shape violations
    Budget = 4,    // infeasible repetition counts, precision/resource caps
    Domain = 5,    // operand outside an operation's admissible domain
    Stat = 6,      // statistical failure (e.g. starved postselection)
    Io = 7,        // file and format problems
    Internal = 8,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), category_(category), code_(std::move(code)) {}

    ErrorCategory category() const { return category_; }
    const std::string& code() const { return code_; }

  private:
    ErrorCategory category_;
    std::string code_;
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Parse: return "PARSE";
        case ErrorCategory::Dim: return "DIM";
        case ErrorCategory::Budget: return "BUDGET";
        case ErrorCategory::Domain: return "DOMAIN";
        case ErrorCategory::Stat: return "STAT";
        case ErrorCategory::Io: return "IO";
        case ErrorCategory::Internal: return "INTERNAL";
    }
    return "INTERNAL";
}

}  // namespace qmat
