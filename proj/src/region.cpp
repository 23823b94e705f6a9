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

#include "normkit/region.hpp"

#include <algorithm>
#include <sstream>

namespace normkit {
namespace {

void check_window(Index extent, const char* what) {
  if (extent < 1 || extent % 2 == 0) {
    throw RegionError(std::string(what) + " window extent must be odd and >= 1, got " +
                      std::to_string(extent));
  }
}

AxisRule rule_for(Coverage coverage, Index window) {
  switch (coverage) {
    case Coverage::kNone:
      return {Coverage::kNone, 0};
    case Coverage::kAll:
      return {Coverage::kAll, 0};
    case Coverage::kWindow:
      return {Coverage::kWindow, (window - 1) / 2};
  }
  return {};
}

}  // namespace

std::string describe(const NormRegion& region) {
  std::ostringstream os;
  os << "{batch=" << (region.over_batch ? "all" : "none") << ", channels=";
  switch (region.channels.coverage) {
    case Coverage::kNone: os << "none"; break;
    case Coverage::kAll: os << "all"; break;
    case Coverage::kWindow: os << "window(" << region.channels.extent << ")"; break;
  }
  os << ", space=";
  switch (region.space.coverage) {
    case Coverage::kNone: os << "none"; break;
    case Coverage::kAll: os << "all"; break;
    case Coverage::kWindow:
      os << "window(" << region.space.height << "," << region.space.width << ")";
      break;
  }
  os << "}";
  return os.str();
}

void validate_region(const NormRegion& region) {
  if (region.channels.coverage == Coverage::kWindow) {
    check_window(region.channels.extent, "channel");
  }
  if (region.space.coverage == Coverage::kWindow) {
    check_window(region.space.height, "height");
    check_window(region.space.width, "width");
  }
  if (!region.over_batch && region.channels.coverage == Coverage::kNone &&
      region.space.coverage == Coverage::kNone) {
    throw RegionError("region " + describe(region) + " includes no axis");
  }
}

void validate_region(const NormRegion& region, const Shape& shape) {
  validate_region(region);
  if (shape.size() == 2) {
    if (region.space.coverage != Coverage::kNone) {
      throw RegionError("region " + describe(region) +
                        " selects spatial axes on a rank-2 tensor");
    }
  } else if (shape.size() != 4) {
    throw RegionError("regions apply to rank-2 or rank-4 tensors, got shape " +
                      to_string(shape));
  }
}

AxisSpan AxisRule::span(Index extent, Index i) const {
  switch (coverage) {
    case Coverage::kNone:
      return {i, i};
    case Coverage::kAll:
      return {0, extent - 1};
    case Coverage::kWindow:
      return {std::max<Index>(0, i - radius), std::min<Index>(extent - 1, i + radius)};
  }
  return {i, i};
}

std::vector<AxisRule> axis_rules(const NormRegion& region, const Shape& shape) {
  validate_region(region, shape);
  std::vector<AxisRule> rules;
  rules.push_back({region.over_batch ? Coverage::kAll : Coverage::kNone, 0});
  rules.push_back(rule_for(region.channels.coverage, region.channels.extent));
  if (shape.size() == 4) {
    rules.push_back(rule_for(region.space.coverage, region.space.height));
    rules.push_back(rule_for(region.space.coverage, region.space.width));
  }
  return rules;
}

std::vector<std::vector<Index>> resolve_region(const NormRegion& region,
                                               const Shape& shape,
                                               const std::vector<Index>& j) {
  const auto rules = axis_rules(region, shape);
  flat_index(shape, j);  // bounds check

  std::vector<AxisSpan> spans;
  for (std::size_t a = 0; a < rules.size(); ++a) {
    spans.push_back(rules[a].span(shape[a], j[a]));
  }

  std::vector<std::vector<Index>> members;
  std::vector<Index> cursor(spans.size());
  for (std::size_t a = 0; a < spans.size(); ++a) cursor[a] = spans[a].lo;
  while (true) {
    members.push_back(cursor);
    std::size_t a = spans.size();
    while (a-- > 0) {
      if (++cursor[a] <= spans[a].hi) break;
      cursor[a] = spans[a].lo;
      if (a == 0) return members;
    }
  }
}

Index region_count(const NormRegion& region, const Shape& shape,
                   const std::vector<Index>& j) {
  const auto rules = axis_rules(region, shape);
  flat_index(shape, j);
  Index count = 1;
  for (std::size_t a = 0; a < rules.size(); ++a) {
    count *= rules[a].span(shape[a], j[a]).count();
  }
  return count;
}

}  // namespace normkit
