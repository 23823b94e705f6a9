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

#include <functional>

#include "normkit/tape.hpp"

namespace normkit {

using ScalarFn = std::function<double(const Tensor&)>;
using TapeFn = std::function<Var(Tape&, const Var&)>;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
/// Throws CheckFailedError naming the coordinate when f is not finite (or
/// throws a NumericalError) at a probe point; ContractError unless
/// 0 < eps <= 1e-2.
Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, double eps);

/// max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|).
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

/// Tape gradient of the scalar f at x versus central differences of the
/// same function; returns the max relative error.
double grad_check(const TapeFn& f, const Tensor& x, double eps = 1e-5);

}  // namespace normkit
