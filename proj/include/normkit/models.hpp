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

// Desk-scale networks with a normalizer after every pre-activation:
//
//   mlp:      [x W + b -> norm -> act] * L -> linear head
//   convnet:  [conv -> norm -> relu -> 2x2 mean pool] * L -> flatten -> head
//   charlstm: one LSTM cell, each gate block normalized separately per step

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "normkit/normalizer.hpp"
#include "normkit/tape.hpp"

namespace normkit {

enum class ModelKind { kMlp, kConvNet, kCharLstm };
enum class Activation { kRelu, kTanh };

std::string_view name(ModelKind kind);
std::string_view name(Activation activation);
ModelKind parse_model_kind(std::string_view text);
Activation parse_activation(std::string_view text);

/// Preset plus overrides; expanded into one NormalizerSpec per insertion
/// point once the channel count there is known.
struct NormSettings {
  Preset preset = Preset::kBN;
  double sigma = 1.0;
  DnWindow dn_window;
  bool affine = true;
  bool allow_zero_sigma = false;
  double lambda_l1 = 0.0;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kMlp;
  Index input_width = 2;  // mlp features, charlstm vocabulary size
  Index in_channels = 1;  // convnet input C x H x W
  Index height = 28;
  Index width = 28;
  std::vector<Index> hidden{32};  // mlp widths or convnet channel counts
  Index kernel = 3;
  Index lstm_hidden = 64;
  Index classes = 2;
  Activation activation = Activation::kRelu;
  std::optional<NormSettings> norm;  // absent: no normalization
};

void validate_model_config(const ModelConfig& config);

/// Normalizer for one insertion point with `channels` channels.
NormalizerSpec layer_spec(const ModelConfig& config, Index rank, Index channels);

/// Parameters by name; std::map keeps iteration deterministic.
using ParamSet = std::map<std::string, Tensor>;
using ParamVars = std::map<std::string, Var>;

/// Fan-in scaled uniform weights, zero biases, unit gains. Deterministic in
/// (config, seed).
ParamSet init_params(const ModelConfig& config, std::uint64_t seed);

ParamVars bind(Tape& tape, const ParamSet& params);

/// One normalizer application, kept for penalties and diagnostics.
struct NormTrace {
  std::string layer;
  Var z;    // pre-activation
  Var v;    // centered
  Var out;  // normalized (after affine)
  NormState state;
};

struct ModelOutput {
  Var logits;
  std::vector<NormTrace> norms;
};

ModelOutput mlp_forward(const ParamVars& params, const Var& x, const ModelConfig& config);
ModelOutput convnet_forward(const ParamVars& params, const Var& x, const ModelConfig& config);

struct LstmState {
  Var h;
  Var c;
  std::vector<NormTrace> norms;
};

/// Gate pre-activations z = x W_x + h W_h + b split into blocks [i | f | o | g];
/// each block is normalized on its own, then
/// c = sigmoid(f) c_prev + sigmoid(i) tanh(g), h = sigmoid(o) tanh(c).
LstmState lstm_cell_forward(const ParamVars& params, const Var& x_t, const Var& h_prev,
                            const Var& c_prev, const ModelConfig& config);
Var lstm_logits(const ParamVars& params, const Var& h);

/// Value-level forward for mlp/convnet: logits plus every NormState.
struct Forward {
  Tensor logits;
  std::vector<NormState> states;
};
Forward forward(const ParamSet& params, const Tensor& x, const ModelConfig& config);

/// Tape-level dispatch for mlp/convnet.
ModelOutput forward(const ParamVars& params, const Var& x, const ModelConfig& config);

/// Rows of a one-hot N x width matrix.
Tensor one_hot(const std::vector<int>& ids, Index width);

}  // namespace normkit
