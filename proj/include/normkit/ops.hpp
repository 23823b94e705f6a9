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

// Value-level tensor operations. None of these record anything; the tape
// versions in tape.hpp wrap them and add backward rules.

#pragma once

#include <optional>

#include "normkit/region.hpp"
#include "normkit/tensor.hpp"

namespace normkit {

enum class ElementOp { kAdd, kSub, kMul, kDiv, kAbs, kSqrt, kTanh, kSigmoid, kRelu, kSquare };

bool is_binary(ElementOp op);
const char* name(ElementOp op);

/// Broadcast result of two shapes of equal rank where mismatched extents
/// must be 1 on one side. Throws ShapeError.
Shape broadcast_shape(const Shape& a, const Shape& b);

/// Applies `op` elementwise. Binary ops require `b`; unary ops reject it.
/// Throws DomainError for sqrt of a negative value or a zero divisor.
Tensor elementwise(ElementOp op, const Tensor& a, const std::optional<Tensor>& b = std::nullopt);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor abs(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

/// Sums `grad` over the axes where `shape` has extent 1, reversing a
/// broadcast.
Tensor sum_to_shape(const Tensor& grad, const Shape& shape);

double sum(const Tensor& a);
double mean(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Columns [begin, begin + count) of an N x D tensor.
Tensor slice_columns(const Tensor& a, Index begin, Index count);

Index conv_output_extent(Index input, Index kernel, Index pad, Index stride);

/// Zero-padded cross-correlation of N x C x H x W input with F x C x k x k
/// weights.
Tensor conv2d(const Tensor& x, const Tensor& w, Index pad, Index stride);

struct Conv2dGrads {
  Tensor dx;
  Tensor dw;
};
Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, Index pad, Index stride,
                            const Tensor& grad_out);

/// Non-overlapping 2x2 average pooling; odd trailing rows/columns dropped.
Tensor mean_pool2x2(const Tensor& x);
Tensor mean_pool2x2_backward(const Shape& input_shape, const Tensor& grad_out);

/// Mean of `x` over the resolved accumulation set of every position,
/// broadcast back to that position. The set is a product of per-axis
/// intervals, so the mean is computed one axis at a time, each pass dividing
/// by the in-bounds count of that axis.
Tensor region_mean(const Tensor& x, const NormRegion& region);

/// Adjoint of region_mean: out_k = sum over j with k in S_j of g_j / |S_j|.
Tensor region_mean_transpose(const Tensor& grad, const NormRegion& region);

}  // namespace normkit
