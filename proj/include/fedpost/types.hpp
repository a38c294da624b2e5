/*
 * Copyright 2026 The fedpost Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDPOST_TYPES_HPP_
#define FEDPOST_TYPES_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fedpost {

// Dense d-dimensional parameter / state vector.
using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorCode {
  kInvalidArgument = 1,
  kSingularMatrix,
  kSingularUpdate,
  kDivergence,
  kConfig,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCode::kInvalidArgument, what) {}
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& what)
      : Error(ErrorCode::kSingularMatrix, what) {}
};

// A Sherman-Morrison denominator fell below the configured guard.
class SingularUpdate : public Error {
 public:
  explicit SingularUpdate(const std::string& what)
      : Error(ErrorCode::kSingularUpdate, what) {}
};

// Non-finite iterate or gradient. `step` is the local step index at which it
// was detected, or -1 when not applicable.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, std::int64_t step)
      : Error(ErrorCode::kDivergence, what), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

// Malformed configuration. `line` is 1-based, 0 when the error is not tied to
// a particular line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : Error(ErrorCode::kConfig, line > 0 ? "line " + std::to_string(line) +
                                                 ": " + what
                                           : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

inline void require_same_dim(Index expected, Index got, const char* what) {
  if (expected != got) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (expected " +
                          std::to_string(expected) + ", got " +
                          std::to_string(got) + ")");
  }
}

inline void require_finite(const ParamVector& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidArgument(std::string(what) + ": non-finite entry");
  }
}

}  // namespace fedpost

#endif  // FEDPOST_TYPES_HPP_
