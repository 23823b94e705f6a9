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

#include "normkit/grad_check.hpp"

#include <cmath>

namespace normkit {
namespace {

double probe(const ScalarFn& f, const Tensor& x, Index coordinate, double offset) {
  Eigen::ArrayXd shifted = x.values();
  shifted[coordinate] += offset;
  double value = 0.0;
  try {
    value = f(Tensor(x.shape(), std::move(shifted)));
  } catch (const NumericalError& e) {
    throw CheckFailedError(std::string("function failed near x: ") + e.what(), coordinate);
  }
  if (!std::isfinite(value)) {
    throw CheckFailedError("function is not finite near x", coordinate);
  }
  return value;
}

}  // namespace

Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw ContractError("grad_check eps must lie in (0, 1e-2], got " + std::to_string(eps));
  }
  Eigen::ArrayXd grad(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    grad[i] = (probe(f, x, i, eps) - probe(f, x, i, -eps)) / (2.0 * eps);
  }
  return Tensor(x.shape(), std::move(grad));
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) {
    throw ShapeError("max_relative_error: " + to_string(analytic.shape()) + " vs " +
                     to_string(numeric.shape()));
  }
  const Eigen::ArrayXd& a = analytic.values();
  const Eigen::ArrayXd& n = numeric.values();
  return ((a - n).abs() / (a.abs() + n.abs()).max(1e-8)).maxCoeff();
}

double grad_check(const TapeFn& f, const Tensor& x, double eps) {
  Tensor analytic;
  {
    Tape tape;
    const Var input = tape.leaf(x);
    const Var out = f(tape, input);
    analytic = tape.backward(out).of(input);
  }
  const ScalarFn value = [&f](const Tensor& point) {
    Tape tape;
    return f(tape, tape.leaf(point)).value().item();
  };
  return max_relative_error(analytic, numeric_gradient(value, x, eps));
}

}  // namespace normkit
