/*
 * Copyright 2026 The lamp-audit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamp {

// Broad error classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kParameter,         // bad argument or violated precondition
  kSingularFit,       // rank-deficient least-squares design
  kInsufficientData,  // too few samples left for a fit
  kParse,             // model output could not be parsed after retries
  kValidation,        // parsed value out of its domain
  kEndpoint,          // transport failure talking to the model
  kAlignment,         // returned factors do not match the requested set
  kCorruptSession,    // session file fails invariant checks
  kMigration,         // unknown or missing schema_version
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what)
      : Error(ErrorKind::kParameter, what) {}
};

// Raised by unregularized fits whose design does not have full column rank.
// `collinear_columns` holds zero-based indices into the caller's regressors
// (the intercept is not counted).
class SingularFitError : public Error {
 public:
  SingularFitError(const std::string& what, std::vector<std::size_t> cols)
      : Error(ErrorKind::kSingularFit, what), collinear_columns_(std::move(cols)) {}

  const std::vector<std::size_t>& collinear_columns() const noexcept {
    return collinear_columns_;
  }

 private:
  std::vector<std::size_t> collinear_columns_;
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what)
      : Error(ErrorKind::kInsufficientData, what) {}
};

// Carries the last raw model output so that callers can log it.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(ErrorKind::kParse, what), raw_(std::move(raw)) {}

  const std::string& raw_response() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

class EndpointError : public Error {
 public:
  explicit EndpointError(const std::string& what)
      : Error(ErrorKind::kEndpoint, what) {}
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::vector<std::string> unmatched)
      : Error(ErrorKind::kAlignment, what), unmatched_(std::move(unmatched)) {}

  const std::vector<std::string>& unmatched() const noexcept { return unmatched_; }

 private:
  std::vector<std::string> unmatched_;
};

class CorruptSessionError : public Error {
 public:
  CorruptSessionError(const std::string& field, const std::string& what)
      : Error(ErrorKind::kCorruptSession, "corrupt session field '" + field + "': " + what),
        field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class MigrationError : public Error {
 public:
  explicit MigrationError(const std::string& what)
      : Error(ErrorKind::kMigration, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace lamp
