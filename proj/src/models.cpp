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

#include "normkit/models.hpp"

#include <cmath>
#include <random>

namespace normkit {
namespace {

constexpr const char* kGates[] = {"i", "f", "o", "g"};

class ParamBuilder {
 public:
  explicit ParamBuilder(std::uint64_t seed) : rng_(seed) {}

  void uniform(ParamSet& params, const std::string& name, Shape shape, Index fan_in) {
    const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::ArrayXd values(numel(shape));
    for (Index i = 0; i < values.size(); ++i) values[i] = dist(rng_);
    params.emplace(name, Tensor(std::move(shape), std::move(values)));
  }

 private:
  std::mt19937_64 rng_;
};

void add_norm_params(ParamSet& params, const ModelConfig& config, const std::string& layer,
                     const Shape& shape) {
  if (!config.norm || !config.norm->affine) return;
  params.emplace(layer + ".gain", Tensor::filled(shape, 1.0));
  params.emplace(layer + ".norm_bias", Tensor::zeros(shape));
}

Var activate(const Var& x, Activation activation) {
  return activation == Activation::kRelu ? ad::relu(x) : ad::tanh(x);
}

const Var& param(const ParamVars& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("missing parameter \"" + name + "\"");
  return it->second;
}

// Normalizes `z` if the model has a normalizer; otherwise passes it on.
Var maybe_normalize(const ParamVars& params, const ModelConfig& config, const std::string& layer,
                    const Var& z, std::vector<NormTrace>& traces) {
  if (!config.norm) return z;
  const Index channels = z.shape()[1];
  NormalizerSpec spec = layer_spec(config, z.value().rank(), channels);
  std::optional<ad::AffineVars> affine;
  if (spec.affine) {
    affine = ad::AffineVars{param(params, layer + ".gain"), param(params, layer + ".norm_bias")};
    spec.gain = affine->gain.value();
    spec.bias = affine->bias.value();
  }
  try {
    ad::NormVars result = ad::normalize(z, spec, affine);
    traces.push_back({layer, z, result.v, result.out, std::move(result.state)});
    return result.out;
  } catch (const ZeroDenominatorError& e) {
    throw ZeroDenominatorError(e.what(), layer);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(e.what(), layer);
  }
}

}  // namespace

std::string_view name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kConvNet: return "convnet";
    case ModelKind::kCharLstm: return "charlstm";
  }
  return "?";
}

std::string_view name(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "tanh";
}

ModelKind parse_model_kind(std::string_view text) {
  for (ModelKind k : {ModelKind::kMlp, ModelKind::kConvNet, ModelKind::kCharLstm}) {
    if (text == name(k)) return k;
  }
  throw ContractError("unknown model kind \"" + std::string(text) + "\"");
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::kRelu;
  if (text == "tanh") return Activation::kTanh;
  throw ContractError("unknown activation \"" + std::string(text) + "\"");
}

void validate_model_config(const ModelConfig& config) {
  if (config.classes < 2) throw ContractError("model needs at least 2 classes");
  if (config.kind == ModelKind::kCharLstm) {
    if (config.lstm_hidden < 1) throw ContractError("lstm_hidden must be >= 1");
  } else if (config.hidden.empty()) {
    throw ContractError("model needs at least one hidden layer");
  }
  for (Index h : config.hidden) {
    if (h < 1) throw ContractError("hidden widths must be >= 1");
  }
  if (config.input_width < 1) throw ContractError("input_width must be >= 1");
  if (config.kind == ModelKind::kConvNet) {
    if (config.kernel < 1 || config.kernel % 2 == 0) {
      throw ContractError("convnet kernel must be odd");
    }
    Index h = config.height, w = config.width;
    for (std::size_t l = 0; l < config.hidden.size(); ++l) {
      if (h < 2 || w < 2) {
        throw ContractError("convnet input " + std::to_string(config.height) + "x" +
                            std::to_string(config.width) + " too small for " +
                            std::to_string(config.hidden.size()) + " pooling stages");
      }
      h /= 2;
      w /= 2;
    }
  }
  if (config.norm) {
    // Build one spec to surface bad sigma / window settings early.
    layer_spec(config, config.kind == ModelKind::kConvNet ? 4 : 2, 1);
  }
}

NormalizerSpec layer_spec(const ModelConfig& config, Index rank, Index channels) {
  if (!config.norm) throw ContractError("model has no normalizer");
  const NormSettings& n = *config.norm;
  PresetOptions options;
  options.rank = rank;
  options.channels = channels;
  options.dn_window = n.dn_window;
  options.sigma = n.sigma;
  options.lambda_l1 = n.lambda_l1;
  options.affine = n.affine;
  options.allow_zero_sigma = n.allow_zero_sigma;
  return spec_preset(n.preset, options);
}

ParamSet init_params(const ModelConfig& config, std::uint64_t seed) {
  validate_model_config(config);
  ParamSet params;
  ParamBuilder builder(seed);
  switch (config.kind) {
    case ModelKind::kMlp: {
      Index in = config.input_width;
      for (std::size_t l = 0; l < config.hidden.size(); ++l) {
        const std::string layer = "layer" + std::to_string(l);
        const Index out = config.hidden[l];
        builder.uniform(params, layer + ".weight", {in, out}, in);
        params.emplace(layer + ".bias", Tensor::zeros({1, out}));
        add_norm_params(params, config, layer, {1, out});
        in = out;
      }
      builder.uniform(params, "head.weight", {in, config.classes}, in);
      params.emplace("head.bias", Tensor::zeros({1, config.classes}));
      break;
    }
    case ModelKind::kConvNet: {
      Index in = config.in_channels, h = config.height, w = config.width;
      const Index k = config.kernel;
      for (std::size_t l = 0; l < config.hidden.size(); ++l) {
        const std::string layer = "conv" + std::to_string(l);
        const Index out = config.hidden[l];
        builder.uniform(params, layer + ".weight", {out, in, k, k}, in * k * k);
        params.emplace(layer + ".bias", Tensor::zeros({1, out, 1, 1}));
        add_norm_params(params, config, layer, {1, out, 1, 1});
        in = out;
        h /= 2;
        w /= 2;
      }
      const Index flat = in * h * w;
      builder.uniform(params, "head.weight", {flat, config.classes}, flat);
      params.emplace("head.bias", Tensor::zeros({1, config.classes}));
      break;
    }
    case ModelKind::kCharLstm: {
      const Index v = config.input_width, h = config.lstm_hidden;
      builder.uniform(params, "lstm.wx", {v, 4 * h}, v + h);
      builder.uniform(params, "lstm.wh", {h, 4 * h}, v + h);
      params.emplace("lstm.bias", Tensor::zeros({1, 4 * h}));
      for (const char* gate : kGates) {
        add_norm_params(params, config, std::string("lstm.gate_") + gate, {1, h});
      }
      builder.uniform(params, "head.weight", {h, config.classes}, h);
      params.emplace("head.bias", Tensor::zeros({1, config.classes}));
      break;
    }
  }
  return params;
}

ParamVars bind(Tape& tape, const ParamSet& params) {
  ParamVars vars;
  for (const auto& [name, value] : params) vars.emplace(name, tape.leaf(value));
  return vars;
}

ModelOutput mlp_forward(const ParamVars& params, const Var& x, const ModelConfig& config) {
  if (x.value().rank() != 2 || x.shape()[1] != config.input_width) {
    throw ShapeError("mlp expects N x " + std::to_string(config.input_width) + " input, got " +
                     to_string(x.shape()));
  }
  ModelOutput out{x, {}};
  Var h = x;
  for (std::size_t l = 0; l < config.hidden.size(); ++l) {
    const std::string layer = "layer" + std::to_string(l);
    const Var z = ad::matmul(h, param(params, layer + ".weight")) + param(params, layer + ".bias");
    h = activate(maybe_normalize(params, config, layer, z, out.norms), config.activation);
  }
  out.logits = ad::matmul(h, param(params, "head.weight")) + param(params, "head.bias");
  return out;
}

ModelOutput convnet_forward(const ParamVars& params, const Var& x, const ModelConfig& config) {
  const Shape expected{x.shape()[0], config.in_channels, config.height, config.width};
  if (x.shape() != expected) {
    throw ShapeError("convnet expects input " + to_string(expected) + ", got " +
                     to_string(x.shape()));
  }
  ModelOutput out{x, {}};
  Var h = x;
  for (std::size_t l = 0; l < config.hidden.size(); ++l) {
    const std::string layer = "conv" + std::to_string(l);
    const Var z = ad::conv2d(h, param(params, layer + ".weight"), config.kernel / 2, 1) +
                  param(params, layer + ".bias");
    h = ad::mean_pool2x2(
        activate(maybe_normalize(params, config, layer, z, out.norms), config.activation));
  }
  const Shape& s = h.shape();
  const Var flat = ad::reshape(h, {s[0], s[1] * s[2] * s[3]});
  out.logits = ad::matmul(flat, param(params, "head.weight")) + param(params, "head.bias");
  return out;
}

LstmState lstm_cell_forward(const ParamVars& params, const Var& x_t, const Var& h_prev,
                            const Var& c_prev, const ModelConfig& config) {
  const Index n = x_t.shape()[0], h = config.lstm_hidden;
  if (x_t.shape() != Shape{n, config.input_width} || h_prev.shape() != Shape{n, h} ||
      c_prev.shape() != Shape{n, h}) {
    throw ShapeError("lstm cell: inconsistent shapes x " + to_string(x_t.shape()) + ", h " +
                     to_string(h_prev.shape()) + ", c " + to_string(c_prev.shape()));
  }
  const Var z = ad::matmul(x_t, param(params, "lstm.wx")) +
                ad::matmul(h_prev, param(params, "lstm.wh")) + param(params, "lstm.bias");
  LstmState state{h_prev, c_prev, {}};
  std::vector<Var> gates;
  for (Index g = 0; g < 4; ++g) {
    const Var block = ad::slice_columns(z, g * h, h);
    gates.push_back(
        maybe_normalize(params, config, std::string("lstm.gate_") + kGates[g], block, state.norms));
  }
  const Var input = ad::sigmoid(gates[0]);
  const Var forget = ad::sigmoid(gates[1]);
  const Var output = ad::sigmoid(gates[2]);
  const Var candidate = ad::tanh(gates[3]);
  state.c = forget * c_prev + input * candidate;
  state.h = output * ad::tanh(state.c);
  return state;
}

Var lstm_logits(const ParamVars& params, const Var& h) {
  return ad::matmul(h, param(params, "head.weight")) + param(params, "head.bias");
}

ModelOutput forward(const ParamVars& params, const Var& x, const ModelConfig& config) {
  switch (config.kind) {
    case ModelKind::kMlp: return mlp_forward(params, x, config);
    case ModelKind::kConvNet: return convnet_forward(params, x, config);
    case ModelKind::kCharLstm: break;
  }
  throw ContractError("forward() covers mlp and convnet; charlstm runs step by step");
}

Forward forward(const ParamSet& params, const Tensor& x, const ModelConfig& config) {
  Tape tape;
  const ParamVars vars = bind(tape, params);
  const ModelOutput out = forward(vars, tape.leaf(x), config);
  Forward result{out.logits.value(), {}};
  for (const NormTrace& t : out.norms) result.states.push_back(t.state);
  return result;
}

Tensor one_hot(const std::vector<int>& ids, Index width) {
  const Index n = static_cast<Index>(ids.size());
  Eigen::ArrayXd values = Eigen::ArrayXd::Zero(n * width);
  for (Index r = 0; r < n; ++r) {
    const int id = ids[static_cast<std::size_t>(r)];
    if (id < 0 || id >= width) throw ContractError("one_hot: id out of range");
    values[r * width + id] = 1.0;
  }
  return Tensor({n, width}, std::move(values));
}

}  // namespace normkit
