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
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "normkit/errors.hpp"

namespace normkit {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Row-major flat offset of a multi-index.
Index flat_index(const Shape& shape, std::span<const Index> index);
std::vector<Index> unravel_index(const Shape& shape, Index flat);

/// Dense, immutable float64 array with shape metadata.
///
/// Layout is row-major; rank-4 tensors are N x C x H x W and rank-2 tensors
/// are N x D. Every extent is at least 1 and every stored value is finite;
/// construction throws NonFiniteError otherwise. Copies share storage.
class Tensor {
 public:
  /// A single zero with shape {1}.
  Tensor();
  Tensor(Shape shape, Eigen::ArrayXd values);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const;
  Index size() const noexcept { return values_->size(); }
  bool is_scalar() const noexcept { return size() == 1; }

  const Eigen::ArrayXd& values() const noexcept { return *values_; }
  double operator[](Index flat) const { return (*values_)[flat]; }
  double at(std::initializer_list<Index> index) const;
  double item() const;

  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::shared_ptr<const Eigen::ArrayXd> values_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace normkit
