/*
 * Copyright 2026 The Ablate Authors.
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

#include <stdexcept>
#include <string>

namespace ablate {

// Error categories double as CLI exit codes.
enum class ErrorKind : int {
  kUsage = 1,
  kData = 2,
  kBackend = 3,
  kIntegrity = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(ErrorKind::kUsage, message) {}
};

// Malformed input files, violated preconditions, undefined statistics.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorKind::kData, message) {}
};

// Degenerate inputs to a statistic (zero variance, all-zero vectors).
class DegenerateDataError : public DataError {
 public:
  using DataError::DataError;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& message)
      : Error(ErrorKind::kIntegrity, message) {}
};

// Failure talking to a model backend. `retryable` is true for transport
// errors and 5xx responses; `attempts` counts round trips made so far.
class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable, int attempts)
      : Error(ErrorKind::kBackend, message),
        retryable_(retryable),
        attempts_(attempts) {}

  bool retryable() const { return retryable_; }
  int attempts() const { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

// A backend answered, but the answer breaks a response invariant.
class ProtocolError : public BackendError {
 public:
  ProtocolError(const std::string& field, const std::string& message)
      : BackendError("protocol violation in '" + field + "': " + message,
                     /*retryable=*/false, /*attempts=*/1),
        field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace ablate
