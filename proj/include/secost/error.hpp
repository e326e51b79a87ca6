// Copyright 2026 The SeCoST Authors.
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

namespace secost {

enum class ErrorKind {
  kMalformedHeader,
  kUnsupportedEncoding,
  kWrongSampleRate,
  kTooShort,
  kShapeMismatch,
  kGraphNotRecorded,
  kInvalidConfig,
  kInputTooShort,
  kIoError,
  kVersionMismatch,
  kLengthMismatch,
  kAlphaOutOfRange,
  kWeightsNotConvex,
  kMissingFeature,
  kParseError,
  kDuplicateId,
  kLabelOutOfRange,
  kEmptyDataset,
  kNoPositives,
  kDegenerateLabels,
  kClassSetMismatch,
  kConfigError,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kMalformedHeader: return "MalformedHeader";
    case ErrorKind::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorKind::kWrongSampleRate: return "WrongSampleRate";
    case ErrorKind::kTooShort: return "TooShort";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kGraphNotRecorded: return "GraphNotRecorded";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kInputTooShort: return "InputTooShort";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kVersionMismatch: return "VersionMismatch";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kAlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorKind::kWeightsNotConvex: return "WeightsNotConvex";
    case ErrorKind::kMissingFeature: return "MissingFeature";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kNoPositives: return "NoPositives";
    case ErrorKind::kDegenerateLabels: return "DegenerateLabels";
    case ErrorKind::kClassSetMismatch: return "ClassSetMismatch";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// All library failures are reported as Error; kind() identifies the
/// contract that was violated so callers and tests can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void check(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) throw_error(kind, message);
}

}  // namespace secost
