// Copyright 2026 The Antehoc Authors
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

namespace antehoc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller-side precondition was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input is empty or otherwise too small to define a result.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A user-supplied parameter is out of range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. The message carries the line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates the dataset schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// The metric is not defined for the given inputs (e.g. a single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int outer_step, int inner_step)
      : Error(what + " (outer step " + std::to_string(outer_step) +
              ", inner step " + std::to_string(inner_step) + ")"),
        outer_step_(outer_step),
        inner_step_(inner_step) {}
  int outer_step() const { return outer_step_; }
  int inner_step() const { return inner_step_; }

 private:
  int outer_step_;
  int inner_step_;
};

/// File system failure. The message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace antehoc
