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

// Three-way gradient agreement for the normalizer: closed-form backward,
// tape backward through the primitive composition, and central differences
// of the value-level forward pass.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normkit/normalizer.hpp"

namespace normkit {

struct GradientCase {
  Preset preset = Preset::kBN;
  double sigma = 1.0;
  bool centered = true;  // forces A = B on, or A off
  bool affine = false;
  std::uint64_t seed = 0;
  Shape shape;
};

std::string describe(const GradientCase& c);

struct GradientCaseResult {
  GradientCase gradient_case;
  double analytic_vs_tape = 0.0;     // max abs
  double analytic_vs_numeric = 0.0;  // max rel
  double tape_vs_numeric = 0.0;      // max rel
  bool passed = false;
};

struct GradientSuiteOptions {
  std::vector<Preset> presets{Preset::kBN, Preset::kLN, Preset::kDN, Preset::kDNNoCenter,
                              Preset::kIdentityLike};
  std::vector<double> sigmas{0.1, 1.0};
  int seeds = 10;
  double eps = 1e-5;
  double tape_tolerance = 1e-12;
  double numeric_tolerance = 1e-6;
};

/// Shapes cycled through by seed; the largest is 4 x 4 x 6 x 6.
const std::vector<Shape>& gradient_case_shapes();

std::vector<GradientCase> gradient_cases(const GradientSuiteOptions& options);
GradientCaseResult run_gradient_case(const GradientCase& c, const GradientSuiteOptions& options);

struct GradientSuiteReport {
  std::vector<GradientCaseResult> results;
  double worst_tape = 0.0;
  double worst_numeric = 0.0;
  bool passed() const;
};

GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& options);

}  // namespace normkit
