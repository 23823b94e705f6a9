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

#include <string>
#include <vector>

#include "normkit/tensor.hpp"

namespace normkit {

enum class Coverage { kNone, kAll, kWindow };

struct ChannelRange {
  Coverage coverage = Coverage::kNone;
  Index extent = 1;  // window only; odd

  static ChannelRange none() { return {}; }
  static ChannelRange all() { return {Coverage::kAll, 1}; }
  static ChannelRange window(Index extent) { return {Coverage::kWindow, extent}; }

  bool operator==(const ChannelRange&) const = default;
};

struct SpatialRange {
  Coverage coverage = Coverage::kNone;
  Index height = 1;  // window only; odd
  Index width = 1;

  static SpatialRange none() { return {}; }
  static SpatialRange all() { return {Coverage::kAll, 1, 1}; }
  static SpatialRange window(Index height, Index width) {
    return {Coverage::kWindow, height, width};
  }

  bool operator==(const SpatialRange&) const = default;
};

/// Declarative accumulation set for a normalizer step.
///
/// For a position j = (n, c, h, w) the set is the Cartesian product of one
/// interval per axis: the batch axis is either {n} or everything, the channel
/// axis is {c}, everything, or a window centered on c, and likewise for the
/// two spatial axes. Windows are clipped at the tensor edge; out-of-bounds
/// positions are dropped rather than zero padded. On rank-2 (N x D) tensors
/// the channel range governs the feature axis and the spatial range must be
/// none.
struct NormRegion {
  bool over_batch = false;
  ChannelRange channels;
  SpatialRange space;

  bool operator==(const NormRegion&) const = default;
};

std::string describe(const NormRegion& region);

/// Checks the shape-independent invariants: odd windows >= 1 and at least
/// one axis included. Throws RegionError.
void validate_region(const NormRegion& region);

/// Also checks the region against a concrete shape (rank 2 or 4).
void validate_region(const NormRegion& region, const Shape& shape);

/// Inclusive index interval along one axis.
struct AxisSpan {
  Index lo = 0;
  Index hi = 0;
  Index count() const { return hi - lo + 1; }
};

/// How one tensor axis contributes to the accumulation set.
struct AxisRule {
  Coverage coverage = Coverage::kNone;
  Index radius = 0;

  AxisSpan span(Index extent, Index i) const;
};

/// One rule per tensor axis, validated against `shape`.
std::vector<AxisRule> axis_rules(const NormRegion& region, const Shape& shape);

/// Explicit accumulation set of position `j` in row-major order.
std::vector<std::vector<Index>> resolve_region(const NormRegion& region,
                                               const Shape& shape,
                                               const std::vector<Index>& j);

/// |set| without materializing it.
Index region_count(const NormRegion& region, const Shape& shape,
                   const std::vector<Index>& j);

}  // namespace normkit
