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

#include "normkit/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace normkit {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

Index flat_index(const Shape& shape, std::span<const Index> index) {
  if (index.size() != shape.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) +
                     " does not match shape " + to_string(shape));
  }
  Index flat = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (index[a] < 0 || index[a] >= shape[a]) {
      throw ShapeError("index out of bounds for shape " + to_string(shape));
    }
    flat = flat * shape[a] + index[a];
  }
  return flat;
}

std::vector<Index> unravel_index(const Shape& shape, Index flat) {
  std::vector<Index> index(shape.size());
  for (std::size_t a = shape.size(); a-- > 0;) {
    index[a] = flat % shape[a];
    flat /= shape[a];
  }
  return index;
}

Tensor::Tensor() : Tensor(Shape{1}, Eigen::ArrayXd::Zero(1)) {}

Tensor::Tensor(Shape shape, Eigen::ArrayXd values) : shape_(std::move(shape)) {
  if (shape_.empty()) throw ShapeError("tensor rank must be at least 1");
  for (Index e : shape_) {
    if (e < 1) {
      throw ShapeError("tensor extents must be >= 1, got " + to_string(shape_));
    }
  }
  if (numel(shape_) != values.size()) {
    throw ShapeError("shape " + to_string(shape_) + " holds " +
                     std::to_string(numel(shape_)) + " values, got " +
                     std::to_string(values.size()));
  }
  if (!values.isFinite().all()) {
    throw NonFiniteError("tensor of shape " + to_string(shape_) +
                         " contains a non-finite value");
  }
  values_ = std::make_shared<const Eigen::ArrayXd>(std::move(values));
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape),
             Eigen::Map<const Eigen::ArrayXd>(values.begin(),
                                              static_cast<Index>(values.size()))) {}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const Index n = numel(shape);
  return Tensor(std::move(shape), Eigen::ArrayXd::Constant(n, value));
}

Tensor Tensor::scalar(double value) {
  return Tensor(Shape{1}, Eigen::ArrayXd::Constant(1, value));
}

Index Tensor::extent(Index axis) const {
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

double Tensor::at(std::initializer_list<Index> index) const {
  return (*values_)[flat_index(shape_, std::span<const Index>(index.begin(), index.size()))];
}

double Tensor::item() const {
  if (!is_scalar()) {
    throw ContractError("item() on non-scalar tensor of shape " + to_string(shape_));
  }
  return (*values_)[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  for (Index e : out.shape_) {
    if (e < 1) throw ShapeError("tensor extents must be >= 1");
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  return (a.values() - b.values()).abs().maxCoeff();
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.values().data(), b.values().data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace normkit
