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

// Scalar-generic array kernels behind the region mean and the normalizer
// forward pass. The Tensor-level API instantiates them for double; the
// finite-difference oracle instantiates them for long double.

#pragma once

#include <vector>

#include <Eigen/Core>

#include "normkit/normalizer.hpp"
#include "normkit/region.hpp"

namespace normkit {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// One separable pass of the region mean along `axis`. With `adjoint` set
/// each source value is divided by its own count and summed over its
/// (symmetric) window instead.
template <typename Scalar>
ArrayX<Scalar> region_mean_pass(const ArrayX<Scalar>& in, const Shape& shape, std::size_t axis,
                                const AxisRule& rule, bool adjoint) {
  Index outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  const Index n = shape[axis];
  Index inner = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];

  ArrayX<Scalar> source = in;
  if (adjoint) {
    for (Index o = 0; o < outer; ++o) {
      for (Index i = 0; i < n; ++i) {
        source.segment((o * n + i) * inner, inner) /= static_cast<Scalar>(rule.span(n, i).count());
      }
    }
  }

  ArrayX<Scalar> out(in.size());
  ArrayX<Scalar> acc(inner);
  for (Index o = 0; o < outer; ++o) {
    if (rule.coverage == Coverage::kAll) {
      acc.setZero();
      for (Index t = 0; t < n; ++t) acc += source.segment((o * n + t) * inner, inner);
      if (!adjoint) acc /= static_cast<Scalar>(n);
      for (Index i = 0; i < n; ++i) out.segment((o * n + i) * inner, inner) = acc;
      continue;
    }
    for (Index i = 0; i < n; ++i) {
      const AxisSpan span = rule.span(n, i);
      acc.setZero();
      for (Index t = span.lo; t <= span.hi; ++t) acc += source.segment((o * n + t) * inner, inner);
      if (!adjoint) acc /= static_cast<Scalar>(span.count());
      out.segment((o * n + i) * inner, inner) = acc;
    }
  }
  return out;
}

template <typename Scalar>
ArrayX<Scalar> region_mean_kernel(ArrayX<Scalar> values, const Shape& shape,
                                  const NormRegion& region, bool adjoint) {
  const auto rules = axis_rules(region, shape);
  for (std::size_t a = 0; a < rules.size(); ++a) {
    if (rules[a].coverage == Coverage::kNone) continue;
    values = region_mean_pass<Scalar>(values, shape, a, rules[a], adjoint);
  }
  return values;
}

/// Normalizer forward pass on raw arrays; `gain` and `bias` hold one value
/// per channel and are ignored unless spec.affine. No zero-denominator
/// check: callers that need it use normalize_forward().
template <typename Scalar>
ArrayX<Scalar> normalize_kernel(const ArrayX<Scalar>& z, const Shape& shape,
                                const NormalizerSpec& spec, const ArrayX<Scalar>& gain,
                                const ArrayX<Scalar>& bias) {
  ArrayX<Scalar> v = z;
  if (spec.region_a) v -= region_mean_kernel<Scalar>(z, shape, *spec.region_a, false);
  const Scalar sigma = static_cast<Scalar>(spec.sigma);
  const ArrayX<Scalar> denom =
      (region_mean_kernel<Scalar>(v.square(), shape, spec.region_b, false) + sigma * sigma)
          .sqrt();
  ArrayX<Scalar> y = v / denom;
  if (!spec.affine) return y;
  const Index channels = shape[1];
  Index inner = 1;
  for (std::size_t a = 2; a < shape.size(); ++a) inner *= shape[a];
  for (Index i = 0; i < y.size(); ++i) {
    const Index c = (i / inner) % channels;
    y[i] = gain[c] * y[i] + bias[c];
  }
  return y;
}

}  // namespace normkit
