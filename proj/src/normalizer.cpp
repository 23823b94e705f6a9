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

#include "normkit/normalizer.hpp"

#include <cmath>

#include "normkit/ops.hpp"

namespace normkit {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(what) + ": " + to_string(a.shape()) + " vs " +
                        to_string(b.shape()));
  }
}

}  // namespace

std::string_view name(Preset preset) {
  switch (preset) {
    case Preset::kBN: return "BN";
    case Preset::kLN: return "LN";
    case Preset::kDN: return "DN";
    case Preset::kDNNoCenter: return "DN-no-center";
    case Preset::kIdentityLike: return "identity-like";
  }
  return "?";
}

Preset parse_preset(std::string_view text) {
  for (Preset p : {Preset::kBN, Preset::kLN, Preset::kDN, Preset::kDNNoCenter,
                   Preset::kIdentityLike}) {
    if (text == name(p)) return p;
  }
  throw ContractError("unknown normalizer preset \"" + std::string(text) +
                      "\" (expected BN, LN, DN, DN-no-center or identity-like)");
}

Shape affine_shape(const Shape& input) {
  if (input.size() == 4) return {1, input[1], 1, 1};
  if (input.size() == 2) return {1, input[1]};
  throw ShapeError("normalizer inputs are rank 2 or 4, got " + to_string(input));
}

void validate_spec(const NormalizerSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw ContractError("sigma must be finite and >= 0, got " + std::to_string(spec.sigma));
  }
  if (spec.sigma == 0.0 && !spec.allow_zero_sigma) {
    throw ContractError("sigma = 0 can divide by zero; set allow_zero_sigma to accept it");
  }
  if (!(spec.lambda_l1 >= 0.0) || !std::isfinite(spec.lambda_l1)) {
    throw ContractError("lambda_l1 must be finite and >= 0");
  }
  if (spec.affine != (spec.gain.has_value() && spec.bias.has_value()) ||
      (!spec.affine && (spec.gain || spec.bias))) {
    throw ContractError("gain and bias must be present exactly when affine is set");
  }
  try {
    if (spec.region_a) validate_region(*spec.region_a);
    validate_region(spec.region_b);
  } catch (const RegionError& e) {
    throw ContractError(std::string("invalid normalizer region: ") + e.what());
  }
}

void validate_spec(const NormalizerSpec& spec, const Shape& input) {
  validate_spec(spec);
  if (spec.region_a) validate_region(*spec.region_a, input);
  validate_region(spec.region_b, input);
  if (spec.affine) {
    const Shape expected = affine_shape(input);
    if (spec.gain->shape() != expected || spec.bias->shape() != expected) {
      throw ShapeError("affine parameters must have shape " + to_string(expected) +
                       " for input " + to_string(input));
    }
  }
}

Tensor center(const Tensor& z, const std::optional<NormRegion>& region_a) {
  if (!region_a) return z;
  return sub(z, region_mean(z, *region_a));
}

DivisiveResult divisive(const Tensor& v, const NormRegion& region_b, double sigma) {
  if (!(sigma >= 0.0)) throw ContractError("sigma must be >= 0");
  const Tensor second_moment = region_mean(square(v), region_b);
  Tensor denom = sqrt(add_scalar(second_moment, sigma * sigma));
  if ((denom.values() == 0.0).any()) {
    throw ZeroDenominatorError(
        "divisive step: sigma = 0 and an accumulation set holds only zeros");
  }
  Tensor y = div(v, denom);
  return {std::move(y), {v, std::move(denom)}};
}

NormResult normalize_forward(const Tensor& z, const NormalizerSpec& spec) {
  validate_spec(spec, z.shape());
  const Tensor v = center(z, spec.region_a);
  auto [y, state] = divisive(v, spec.region_b, spec.sigma);
  if (!spec.affine) return {std::move(y), std::move(state)};
  return {add(mul(y, *spec.gain), *spec.bias), std::move(state)};
}

Tensor divisive_backward(const NormState& state, const NormRegion& region_b,
                         const Tensor& grad_y) {
  require_same_shape(state.v, state.denom, "normalizer state");
  require_same_shape(state.v, grad_y, "upstream gradient");
  const Eigen::ArrayXd& v = state.v.values();
  const Eigen::ArrayXd& d = state.denom.values();
  const Eigen::ArrayXd& g = grad_y.values();
  const Tensor weighted(state.v.shape(), g * v / (d * d * d));
  const Tensor pooled = region_mean_transpose(weighted, region_b);
  return Tensor(state.v.shape(), g / d - v * pooled.values());
}

Tensor center_backward(const Tensor& grad_v, const std::optional<NormRegion>& region_a) {
  if (!region_a) return grad_v;
  return sub(grad_v, region_mean_transpose(grad_v, *region_a));
}

NormGradients normalize_backward(const NormState& state, const NormalizerSpec& spec,
                                 const Tensor& upstream) {
  try {
    validate_spec(spec, state.v.shape());
  } catch (const Error& e) {
    throw ContractError(std::string("state does not match spec: ") + e.what());
  }
  require_same_shape(state.v, upstream, "upstream gradient");

  NormGradients grads;
  Tensor grad_y = upstream;
  if (spec.affine) {
    const Tensor y = div(state.v, state.denom);
    grads.dgain = sum_to_shape(mul(upstream, y), spec.gain->shape());
    grads.dbias = sum_to_shape(upstream, spec.bias->shape());
    grad_y = mul(upstream, *spec.gain);
  }
  grads.dz = center_backward(divisive_backward(state, spec.region_b, grad_y), spec.region_a);
  return grads;
}

NormalizerSpec spec_preset(Preset kind, const PresetOptions& options) {
  if (options.rank != 2 && options.rank != 4) {
    throw ContractError("presets are defined for rank 2 or 4 inputs");
  }
  if (options.channels < 1) throw ContractError("channels must be >= 1");
  const bool spatial = options.rank == 4;

  const DnWindow& w = options.dn_window;
  const ChannelRange dn_channels =
      w.channels ? ChannelRange::window(*w.channels) : ChannelRange::all();
  NormRegion region;
  switch (kind) {
    case Preset::kBN:
      region = {true, ChannelRange::none(), spatial ? SpatialRange::all() : SpatialRange::none()};
      break;
    case Preset::kLN:
      region = {false, ChannelRange::all(), spatial ? SpatialRange::all() : SpatialRange::none()};
      break;
    case Preset::kDN:
    case Preset::kDNNoCenter:
      region = {false, dn_channels,
                spatial ? SpatialRange::window(w.height, w.width) : SpatialRange::none()};
      break;
    case Preset::kIdentityLike:
      region = {false, ChannelRange::window(1),
                spatial ? SpatialRange::window(1, 1) : SpatialRange::none()};
      break;
  }
  try {
    validate_region(region);
  } catch (const RegionError& e) {
    throw ContractError(std::string("invalid DN window: ") + e.what());
  }

  NormalizerSpec spec;
  const bool centered = kind == Preset::kBN || kind == Preset::kLN || kind == Preset::kDN;
  if (centered) spec.region_a = region;
  spec.region_b = region;
  spec.sigma = options.sigma;
  spec.lambda_l1 = options.lambda_l1;
  spec.allow_zero_sigma = options.allow_zero_sigma;
  spec.affine = options.affine;
  if (options.affine) {
    const Shape shape = spatial ? Shape{1, options.channels, 1, 1} : Shape{1, options.channels};
    spec.gain = Tensor::filled(shape, 1.0);
    spec.bias = Tensor::zeros(shape);
  }
  validate_spec(spec);
  return spec;
}

namespace ad {
namespace {

void check_affine(const NormalizerSpec& spec, const std::optional<AffineVars>& affine,
                  const Shape& input) {
  if (spec.affine != affine.has_value()) {
    throw ContractError("affine variables must be supplied exactly when spec.affine is set");
  }
  if (affine) {
    const Shape expected = affine_shape(input);
    if (affine->gain.shape() != expected || affine->bias.shape() != expected) {
      throw ShapeError("affine parameters must have shape " + to_string(expected));
    }
  }
}

}  // namespace

NormVars normalize(const Var& z, const NormalizerSpec& spec,
                   const std::optional<AffineVars>& affine) {
  validate_spec(spec);
  if (spec.region_a) validate_region(*spec.region_a, z.shape());
  validate_region(spec.region_b, z.shape());
  check_affine(spec, affine, z.shape());
  Tape& tape = z.tape();

  const std::optional<NormRegion> region_a = spec.region_a;
  Var v = region_a ? tape.record(center(z.value(), region_a), {z.id()},
                                 [region_a](const Tensor& g) {
                                   return std::vector<Tensor>{center_backward(g, region_a)};
                                 })
                   : z;

  auto [y, state] = divisive(v.value(), spec.region_b, spec.sigma);
  const NormRegion region_b = spec.region_b;
  if (!affine) {
    Var out = tape.record(y, {v.id()}, [state = state, region_b](const Tensor& g) {
      return std::vector<Tensor>{divisive_backward(state, region_b, g)};
    });
    return {out, v, std::move(state)};
  }

  const Tensor gain = affine->gain.value();
  const Tensor bias = affine->bias.value();
  Var out = tape.record(
      add(mul(y, gain), bias), {v.id(), affine->gain.id(), affine->bias.id()},
      [state = state, region_b, y = y, gain, bias](const Tensor& g) {
        return std::vector<Tensor>{divisive_backward(state, region_b, mul(g, gain)),
                                   sum_to_shape(mul(g, y), gain.shape()),
                                   sum_to_shape(g, bias.shape())};
      });
  return {out, v, std::move(state)};
}

Var normalize_composed(const Var& z, const NormalizerSpec& spec,
                       const std::optional<AffineVars>& affine) {
  validate_spec(spec);
  check_affine(spec, affine, z.shape());
  const Var v = spec.region_a ? z - region_mean(z, *spec.region_a) : z;
  const Var denom = sqrt(add_scalar(region_mean(square(v), spec.region_b), spec.sigma * spec.sigma));
  const Var y = v / denom;
  if (!affine) return y;
  return y * affine->gain + affine->bias;
}

}  // namespace ad
}  // namespace normkit
