/* Copyright 2026 The normkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace normkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents do not agree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NormRegion cannot be resolved against a tensor (bad rank, bad window,
// or an empty accumulation set).
class RegionError : public Error {
 public:
  using Error::Error;
};

// Precondition violated by the caller (non-scalar loss, bad eps, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Base for failures caused by the numbers themselves rather than by the
// shapes. Training converts these into a numerical abort; `where` names
// the layer when one is known.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::string where = {})
      : Error(where.empty() ? what : where + ": " + what),
        where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroDenominatorError : public DomainError {
 public:
  using DomainError::DomainError;
};

class NonFiniteError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Raised by gradient checking when the probed function is not finite in the
// eps-neighborhood of a coordinate.
class CheckFailedError : public Error {
 public:
  CheckFailedError(const std::string& what, std::int64_t coordinate)
      : Error(what + " (coordinate " + std::to_string(coordinate) + ")"),
        coordinate_(coordinate) {}

  std::int64_t coordinate() const noexcept { return coordinate_; }

 private:
  std::int64_t coordinate_;
};

}  // namespace normkit
