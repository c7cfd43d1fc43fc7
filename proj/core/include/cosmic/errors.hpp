// Copyright 2026 the cosmic authors
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

namespace cosmic {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory : int {
  kIo = 3,        // filesystem / stream failures
  kFormat = 4,    // bad magic, truncation, length mismatch, unparseable text
  kMismatch = 5,  // shape/channel mismatches, lambda-vs-weights disagreement
  kNumeric = 6,   // NaN/Inf, divergence, symbol saturation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCategory::kFormat, what) {}
};

struct MismatchError : Error {
  explicit MismatchError(const std::string& what) : Error(ErrorCategory::kMismatch, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::kNumeric, what) {}
};

}  // namespace cosmic
