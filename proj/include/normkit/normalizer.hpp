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

// Two-step normalizer:
//
//   v_j   = z_j - mean_{k in A_j} z_k                     (skipped if A absent)
//   d_j   = sqrt(sigma^2 + mean_{k in B_j} v_k^2)
//   y_j   = v_j / d_j
//   out_j = gain_c * y_j + bias_c                         (affine only)
//
// Batch, layer and divisive normalization differ only in the accumulation
// sets A_j and B_j; see spec_preset().

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "normkit/region.hpp"
#include "normkit/tape.hpp"
#include "normkit/tensor.hpp"

namespace normkit {

enum class Preset { kBN, kLN, kDN, kDNNoCenter, kIdentityLike };

std::string_view name(Preset preset);
/// Accepts "BN", "LN", "DN", "DN-no-center", "identity-like".
Preset parse_preset(std::string_view text);

/// Divisive-normalization neighborhood. `channels` absent means the window
/// spans every channel.
struct DnWindow {
  std::optional<Index> channels;
  Index height = 5;
  Index width = 5;

  bool operator==(const DnWindow&) const = default;
};

struct NormalizerSpec {
  std::optional<NormRegion> region_a;
  NormRegion region_b;
  double sigma = 1.0;
  bool affine = false;
  std::optional<Tensor> gain;  // present iff affine
  std::optional<Tensor> bias;
  double lambda_l1 = 0.0;  // consumed by training
  // sigma == 0 divides by raw second moments and can hit 0/0; the caller
  // must opt in.
  bool allow_zero_sigma = false;
};

/// Shape of per-channel (rank 4) or per-feature (rank 2) affine parameters.
Shape affine_shape(const Shape& input);

/// Shape-independent invariants. Throws ContractError.
void validate_spec(const NormalizerSpec& spec);
/// Also checks regions and affine parameters against an input shape.
void validate_spec(const NormalizerSpec& spec, const Shape& input);

struct NormState {
  Tensor v;      // centered activations
  Tensor denom;  // sqrt(sigma^2 + mean_B v^2), >= sigma
};

Tensor center(const Tensor& z, const std::optional<NormRegion>& region_a);

struct DivisiveResult {
  Tensor y;
  NormState state;
};

/// Throws ZeroDenominatorError when sigma == 0 and some B_j holds only
/// zeros; ContractError when sigma < 0.
DivisiveResult divisive(const Tensor& v, const NormRegion& region_b, double sigma);

struct NormResult {
  Tensor out;
  NormState state;
};

NormResult normalize_forward(const Tensor& z, const NormalizerSpec& spec);

struct NormGradients {
  Tensor dz;
  std::optional<Tensor> dgain;  // present iff spec.affine
  std::optional<Tensor> dbias;
};

/// Closed-form backward pass. With g the gradient reaching y,
///
///   dv_k = g_k / d_k - v_k * sum_{j : k in B_j} g_j v_j / (|B_j| d_j^3)
///   dz_k = dv_k - sum_{j : k in A_j} dv_j / |A_j|
///
/// Both sums are adjoint region means. Throws ContractError when the state
/// does not belong to this spec or upstream has the wrong shape.
NormGradients normalize_backward(const NormState& state, const NormalizerSpec& spec,
                                 const Tensor& upstream);

Tensor divisive_backward(const NormState& state, const NormRegion& region_b,
                         const Tensor& grad_y);
Tensor center_backward(const Tensor& grad_v, const std::optional<NormRegion>& region_a);

struct PresetOptions {
  Index rank = 4;      // 2 for N x D inputs, 4 for N x C x H x W
  Index channels = 1;  // C, or D for rank 2
  DnWindow dn_window;
  double sigma = 1.0;
  double lambda_l1 = 0.0;
  bool affine = false;
  bool allow_zero_sigma = false;
};

/// BN:            A = B = {batch, all space}            per-channel statistics
/// LN:            A = B = {all channels, all space}     per-example statistics
/// DN:            A = B = {channel window, space window} within one example
/// DN-no-center:  A absent, B as DN
/// identity-like: A absent, B = {j}; y = v / sqrt(sigma^2 + v^2), not identity
/// On rank-2 inputs the spatial selections are dropped.
NormalizerSpec spec_preset(Preset kind, const PresetOptions& options);

namespace ad {

struct AffineVars {
  Var gain;
  Var bias;
};

struct NormVars {
  Var out;
  Var v;
  NormState state;
};

/// Records the normalizer as two nodes (centering, then divide + affine)
/// whose backward rules are the closed forms above. `v` stays on the tape
/// so an activation penalty can reach it.
NormVars normalize(const Var& z, const NormalizerSpec& spec,
                   const std::optional<AffineVars>& affine = std::nullopt);

/// The same function assembled from primitive tape ops only. Serves as the
/// autodiff reference for normalize_backward.
Var normalize_composed(const Var& z, const NormalizerSpec& spec,
                       const std::optional<AffineVars>& affine = std::nullopt);

}  // namespace ad
}  // namespace normkit
