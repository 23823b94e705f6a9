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

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "normkit/ops.hpp"
#include "normkit/tensor.hpp"

namespace normkit {

using NodeId = std::size_t;

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
class Var {
 public:
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_;
  NodeId id_;
};

/// Gradient of one scalar with respect to every node of a tape.
class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

  bool reached(NodeId id) const { return id < grads_.size() && grads_[id].has_value(); }
  /// Zeros of the node's shape when the loss does not depend on it.
  Tensor of(const Var& v) const;

 private:
  std::vector<std::optional<Tensor>> grads_;
};

/// Append-only record of primitive operations, rebuilt for every forward
/// pass. Node ids are topologically ordered: every input of node k has an id
/// below k.
class Tape {
 public:
  /// Maps the gradient of a node's output to one gradient per input.
  using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar node; fan-out gradients add up.
  Gradients backward(const Var& loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

inline Gradients backward(const Tape& tape, const Var& loss) { return tape.backward(loss); }

namespace ad {

Var elementwise(ElementOp op, const Var& a, const std::optional<Var>& b = std::nullopt);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var abs(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var square(const Var& a);

Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double value);

Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);

Var matmul(const Var& a, const Var& b);
Var slice_columns(const Var& a, Index begin, Index count);
Var conv2d(const Var& x, const Var& w, Index pad, Index stride);
Var mean_pool2x2(const Var& x);
Var region_mean(const Var& x, const NormRegion& region);

/// Mean over rows of -log softmax(logits)[target], max-shifted.
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets);

}  // namespace ad

inline Var operator+(const Var& a, const Var& b) { return ad::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ad::sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return ad::mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return ad::div(a, b); }

}  // namespace normkit
