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

#include "normkit/gradient_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

#include "normkit/grad_check.hpp"
#include "normkit/kernels.hpp"

namespace normkit {
namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  Eigen::ArrayXd values(numel(shape));
  for (Index i = 0; i < values.size(); ++i) values[i] = dist(rng);
  return Tensor(shape, std::move(values));
}

Tensor uniform_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::ArrayXd values(numel(shape));
  for (Index i = 0; i < values.size(); ++i) values[i] = dist(rng);
  return Tensor(shape, std::move(values));
}

NormalizerSpec case_spec(const GradientCase& c) {
  PresetOptions options;
  options.rank = static_cast<Index>(c.shape.size());
  options.channels = c.shape[1];
  options.dn_window = {3, 3, 3};
  options.sigma = c.sigma;
  options.affine = c.affine;
  NormalizerSpec spec = spec_preset(c.preset, options);
  if (c.centered && !spec.region_a) spec.region_a = spec.region_b;
  if (!c.centered) spec.region_a.reset();
  return spec;
}

// The finite-difference side runs in extended precision: a coordinate whose
// true derivative is ~1e-4 would otherwise drown in the ~1e-10 rounding
// noise of a float64 loss difference divided by 2 eps.
using Wide = long double;

ArrayX<Wide> widen(const Tensor& t) { return t.values().cast<Wide>(); }

Tensor central_differences(const std::function<Wide(const ArrayX<Wide>&)>& loss,
                           const Tensor& at, double eps) {
  const ArrayX<Wide> base = widen(at);
  Eigen::ArrayXd grad(base.size());
  for (Index i = 0; i < base.size(); ++i) {
    ArrayX<Wide> plus = base;
    ArrayX<Wide> minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    grad[i] = static_cast<double>((loss(plus) - loss(minus)) / (2 * static_cast<Wide>(eps)));
  }
  return Tensor(at.shape(), std::move(grad));
}

}  // namespace

std::string describe(const GradientCase& c) {
  std::ostringstream os;
  os << name(c.preset) << " sigma=" << c.sigma << (c.centered ? " centered" : " uncentered")
     << (c.affine ? " affine" : " plain") << " seed=" << c.seed << " shape=" << to_string(c.shape);
  return os.str();
}

const std::vector<Shape>& gradient_case_shapes() {
  static const std::vector<Shape> shapes{
      {4, 4, 6, 6}, {2, 3, 5, 5}, {3, 2, 4, 6}, {4, 3},       {3, 5},
      {1, 3, 3, 3}, {2, 4, 6, 6}, {4, 6},       {3, 4, 5, 4}, {2, 2, 3, 3}};
  return shapes;
}

std::vector<GradientCase> gradient_cases(const GradientSuiteOptions& options) {
  std::vector<GradientCase> cases;
  const auto& shapes = gradient_case_shapes();
  for (Preset preset : options.presets) {
    for (double sigma : options.sigmas) {
      for (bool centered : {true, false}) {
        for (bool affine : {false, true}) {
          for (int s = 0; s < options.seeds; ++s) {
            const auto seed = static_cast<std::uint64_t>(s);
            cases.push_back({preset, sigma, centered, affine, seed, shapes[seed % shapes.size()]});
          }
        }
      }
    }
  }
  return cases;
}

GradientCaseResult run_gradient_case(const GradientCase& c, const GradientSuiteOptions& options) {
  std::mt19937_64 rng(0x5eed0000u + c.seed);
  NormalizerSpec spec = case_spec(c);
  const Tensor z = random_tensor(c.shape, rng, 0.5, 1.0);
  const Tensor upstream = random_tensor(c.shape, rng, 0.0, 1.0);
  if (spec.affine) {
    spec.gain = uniform_tensor(spec.gain->shape(), rng, 0.5, 1.5);
    spec.bias = random_tensor(spec.bias->shape(), rng, 0.0, 1.0);
  }

  // Closed form.
  const NormResult forward = normalize_forward(z, spec);
  const NormGradients analytic = normalize_backward(forward.state, spec, upstream);

  // Tape through primitives.
  Tape tape;
  const Var zv = tape.leaf(z);
  std::optional<ad::AffineVars> affine;
  if (spec.affine) affine = ad::AffineVars{tape.leaf(*spec.gain), tape.leaf(*spec.bias)};
  const Var out = ad::normalize_composed(zv, spec, affine);
  const Var tape_loss = ad::sum(out * tape.leaf(upstream));
  const Gradients tape_grads = tape.backward(tape_loss);

  // Central differences of the forward pass.
  const ArrayX<Wide> wide_r = widen(upstream);
  const ArrayX<Wide> wide_z = widen(z);
  const ArrayX<Wide> no_affine;
  const ArrayX<Wide> wide_gain = spec.affine ? widen(*spec.gain) : no_affine;
  const ArrayX<Wide> wide_bias = spec.affine ? widen(*spec.bias) : no_affine;
  const auto loss = [&](const ArrayX<Wide>& zz, const ArrayX<Wide>& gain,
                        const ArrayX<Wide>& bias) {
    return (normalize_kernel<Wide>(zz, c.shape, spec, gain, bias) * wide_r).sum();
  };
  const Tensor numeric_dz = central_differences(
      [&](const ArrayX<Wide>& zz) { return loss(zz, wide_gain, wide_bias); }, z, options.eps);

  GradientCaseResult result;
  result.gradient_case = c;
  const Tensor tape_dz = tape_grads.of(zv);
  result.analytic_vs_tape = max_abs_diff(analytic.dz, tape_dz);
  result.analytic_vs_numeric = max_relative_error(analytic.dz, numeric_dz);
  result.tape_vs_numeric = max_relative_error(tape_dz, numeric_dz);

  if (spec.affine) {
    const Tensor numeric_dgain = central_differences(
        [&](const ArrayX<Wide>& g) { return loss(wide_z, g, wide_bias); }, *spec.gain,
        options.eps);
    const Tensor numeric_dbias = central_differences(
        [&](const ArrayX<Wide>& b) { return loss(wide_z, wide_gain, b); }, *spec.bias,
        options.eps);
    const Tensor tape_dgain = tape_grads.of(affine->gain);
    const Tensor tape_dbias = tape_grads.of(affine->bias);
    result.analytic_vs_tape =
        std::max({result.analytic_vs_tape, max_abs_diff(*analytic.dgain, tape_dgain),
                  max_abs_diff(*analytic.dbias, tape_dbias)});
    result.analytic_vs_numeric =
        std::max({result.analytic_vs_numeric, max_relative_error(*analytic.dgain, numeric_dgain),
                  max_relative_error(*analytic.dbias, numeric_dbias)});
    result.tape_vs_numeric =
        std::max({result.tape_vs_numeric, max_relative_error(tape_dgain, numeric_dgain),
                  max_relative_error(tape_dbias, numeric_dbias)});
  }

  result.passed = result.analytic_vs_tape <= options.tape_tolerance &&
                  result.analytic_vs_numeric <= options.numeric_tolerance &&
                  result.tape_vs_numeric <= options.numeric_tolerance;
  return result;
}

bool GradientSuiteReport::passed() const {
  return std::all_of(results.begin(), results.end(),
                     [](const GradientCaseResult& r) { return r.passed; });
}

GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& options) {
  GradientSuiteReport report;
  for (const GradientCase& c : gradient_cases(options)) {
    report.results.push_back(run_gradient_case(c, options));
    const auto& r = report.results.back();
    report.worst_tape = std::max(report.worst_tape, r.analytic_vs_tape);
    report.worst_numeric =
        std::max({report.worst_numeric, r.analytic_vs_numeric, r.tape_vs_numeric});
  }
  return report;
}

}  // namespace normkit
