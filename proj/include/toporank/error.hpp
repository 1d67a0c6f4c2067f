// Copyright 2026 The toporank Authors.
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
#include <string_view>

namespace toporank {

enum class ErrorCode {
  kInvalidArgument,
  kDimMismatch,
  kOutOfRange,
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kTrailingBytes,
  kMalformedHeader,
  kCountMismatch,
  kTapMismatch,
  kInsufficientReferences,
  kDegenerateInput,
  kDivergence,
  kEmptyPartition,
  kUndefinedMetric,
  kNonFinite,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimMismatch: return "dim_mismatch";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kTrailingBytes: return "trailing_bytes";
    case ErrorCode::kMalformedHeader: return "malformed_header";
    case ErrorCode::kCountMismatch: return "count_mismatch";
    case ErrorCode::kTapMismatch: return "tap_mismatch";
    case ErrorCode::kInsufficientReferences: return "insufficient_references";
    case ErrorCode::kDegenerateInput: return "degenerate_input";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kEmptyPartition: return "empty_partition";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kNonFinite: return "non_finite";
  }
  return "unknown";
}

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // what() without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace toporank
