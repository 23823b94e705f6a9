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

#include "normkit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace normkit {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start, const TrainConfig& train) {
  if (!train.record_wall_time) return 0.0;
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Index of the largest entry of row r; the first one wins ties.
Index argmax_row(const Tensor& logits, Index r) {
  const Index k = logits.extent(1);
  Index best = 0;
  for (Index j = 1; j < k; ++j) {
    if (logits[r * k + j] > logits[r * k + best]) best = j;
  }
  return best;
}

Index correct_count(const Tensor& logits, const std::vector<int>& targets) {
  Index correct = 0;
  for (Index r = 0; r < logits.extent(0); ++r) {
    if (argmax_row(logits, r) == targets[static_cast<std::size_t>(r)]) ++correct;
  }
  return correct;
}

const Var& penalty_source(const NormTrace& trace, L1Target target) {
  switch (target) {
    case L1Target::kV: return trace.v;
    case L1Target::kY: return trace.out;
    case L1Target::kZ: return trace.z;
  }
  return trace.v;
}

struct Pass {
  Var loss;
  double correct = 0.0;
  double predictions = 0.0;
  std::vector<NormTrace> norms;
};

Pass classify(const ModelConfig& model, const ParamVars& vars, const Dataset& data,
              const std::vector<Index>& rows, Tape& tape) {
  Tensor x = gather_rows(*data.inputs, rows);
  if (model.kind == ModelKind::kMlp && x.rank() != 2) {
    x = x.reshaped({x.extent(0), x.size() / x.extent(0)});
  }
  std::vector<int> targets;
  for (Index r : rows) targets.push_back(data.labels[static_cast<std::size_t>(r)]);
  ModelOutput out = forward(vars, tape.leaf(x), model);
  Pass pass{ad::cross_entropy_loss(out.logits, targets),
            static_cast<double>(correct_count(out.logits.value(), targets)),
            static_cast<double>(rows.size()), std::move(out.norms)};
  return pass;
}

// Unrolls the cell over each window from a zero state; the loss is the mean
// of the per-step batch cross-entropies.
Pass predict_chars(const ModelConfig& model, const ParamVars& vars, const Dataset& data,
                   const std::vector<Index>& rows, Tape& tape) {
  const Index n = static_cast<Index>(rows.size());
  const Index vocab = static_cast<Index>(data.vocabulary.size());
  Var h = tape.leaf(Tensor::zeros({n, model.lstm_hidden}));
  Var c = tape.leaf(Tensor::zeros({n, model.lstm_hidden}));
  std::optional<Var> total;
  Pass pass{h, 0.0, 0.0, {}};
  for (Index t = 0; t < data.seq_len; ++t) {
    std::vector<int> inputs, targets;
    for (Index r : rows) {
      const auto at = static_cast<std::size_t>(r * data.seq_len + t);
      inputs.push_back(data.tokens[at]);
      targets.push_back(data.tokens[at + 1]);
    }
    LstmState state = lstm_cell_forward(vars, tape.leaf(one_hot(inputs, vocab)), h, c, model);
    h = state.h;
    c = state.c;
    for (NormTrace& trace : state.norms) pass.norms.push_back(std::move(trace));
    const Var logits = lstm_logits(vars, h);
    const Var step_loss = ad::cross_entropy_loss(logits, targets);
    total = total ? *total + step_loss : step_loss;
    pass.correct += static_cast<double>(correct_count(logits.value(), targets));
    pass.predictions += static_cast<double>(n);
  }
  pass.loss = ad::scale(*total, 1.0 / static_cast<double>(data.seq_len));
  return pass;
}

MetricsRecord abort_record(Index step, int epoch, const std::string& split) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {step, epoch, split, nan, nan, nan, nan, 0.0};
}

}  // namespace

std::string_view name(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

std::string_view name(L1Target target) {
  switch (target) {
    case L1Target::kV: return "v";
    case L1Target::kY: return "y";
    case L1Target::kZ: return "z";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adam") return OptimizerKind::kAdam;
  throw ContractError("unknown optimizer \"" + std::string(text) + "\"");
}

L1Target parse_l1_target(std::string_view text) {
  for (L1Target t : {L1Target::kV, L1Target::kY, L1Target::kZ}) {
    if (text == name(t)) return t;
  }
  throw ContractError("unknown L1 target \"" + std::string(text) + "\" (expected v, y or z)");
}

void validate_train_config(const TrainConfig& c) {
  const auto require = [](bool ok, const std::string& field, const std::string& rule) {
    if (!ok) throw ContractError("train." + field + " " + rule);
  };
  require(std::isfinite(c.learning_rate) && c.learning_rate >= 0, "learning_rate",
          "must be finite and >= 0");
  require(std::isfinite(c.momentum) && c.momentum >= 0 && c.momentum < 1, "momentum",
          "must lie in [0, 1)");
  require(c.beta1 >= 0 && c.beta1 < 1, "beta1", "must lie in [0, 1)");
  require(c.beta2 >= 0 && c.beta2 < 1, "beta2", "must lie in [0, 1)");
  require(std::isfinite(c.epsilon) && c.epsilon > 0, "epsilon", "must be > 0");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.epochs >= 1, "epochs", "must be >= 1");
  require(std::isfinite(c.lambda_l1) && c.lambda_l1 >= 0, "lambda_l1", "must be >= 0");
  require(std::isfinite(c.sigma) && c.sigma >= 0, "sigma", "must be finite and >= 0");
}

Tensor l1_activation_penalty(const std::vector<NormState>& states, double lambda) {
  if (!(lambda >= 0)) throw ContractError("l1_activation_penalty: lambda must be >= 0");
  if (lambda == 0.0) return Tensor::scalar(0.0);
  return Tensor::scalar(lambda * mean_abs_v(states));
}

double mean_abs_v(const std::vector<NormState>& states) {
  double total = 0.0;
  Index count = 0;
  for (const NormState& s : states) {
    total += s.v.values().abs().sum();
    count += s.v.size();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets) {
  Tape tape;
  return ad::cross_entropy_loss(tape.leaf(logits), targets).value();
}

Tensor total_objective(const Tensor& loss, const Tensor& penalty) {
  if (!loss.is_scalar() || !penalty.is_scalar()) {
    throw ShapeError("total_objective expects two scalars");
  }
  return Tensor::scalar(loss.item() + penalty.item());
}

double accuracy(const Tensor& logits, const std::vector<int>& targets) {
  if (logits.rank() != 2 || static_cast<Index>(targets.size()) != logits.extent(0)) {
    throw ShapeError("accuracy expects N x K logits and N targets");
  }
  if (targets.empty()) throw ContractError("accuracy of an empty batch");
  return static_cast<double>(correct_count(logits, targets)) /
         static_cast<double>(targets.size());
}

namespace ad {

Var l1_activation_penalty(Tape& tape, const std::vector<Var>& activations, double lambda) {
  if (!(lambda >= 0)) throw ContractError("l1_activation_penalty: lambda must be >= 0");
  Index count = 0;
  std::optional<Var> total;
  for (const Var& a : activations) {
    const Var s = ad::sum(ad::abs(a));
    total = total ? *total + s : s;
    count += a.value().size();
  }
  if (!total || lambda == 0.0) return tape.leaf(Tensor::scalar(0.0));
  return ad::scale(*total, lambda / static_cast<double>(count));
}

Var cross_entropy_loss(const Var& logits, const std::vector<int>& targets) {
  return softmax_cross_entropy(logits, targets);
}

Var total_objective(const Var& loss, const Var& penalty) {
  if (!loss.value().is_scalar() || !penalty.value().is_scalar()) {
    throw ShapeError("total_objective expects two scalars");
  }
  return loss + penalty;
}

}  // namespace ad

Optimizer::Optimizer(const TrainConfig& config) : config_(config) {
  validate_train_config(config);
}

ParamSet Optimizer::step(const ParamSet& params, const ParamSet& grads) {
  if (params.size() != grads.size()) {
    throw ContractError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  ++steps_;
  const auto t = static_cast<double>(steps_);
  ParamSet updated;
  for (const auto& [key, w] : params) {
    auto g_it = grads.find(key);
    if (g_it == grads.end()) throw ContractError("optimizer: no gradient for \"" + key + "\"");
    const Eigen::ArrayXd& g = g_it->second.values();
    if (g_it->second.shape() != w.shape()) {
      throw ShapeError("optimizer: gradient of \"" + key + "\" has shape " +
                       to_string(g_it->second.shape()) + ", parameter " + to_string(w.shape()));
    }
    auto [m_it, fresh] = first_.try_emplace(key, Eigen::ArrayXd::Zero(w.size()));
    Eigen::ArrayXd& m = m_it->second;
    Eigen::ArrayXd next;
    if (config_.optimizer == OptimizerKind::kSgd) {
      m = config_.momentum * m + g;
      next = w.values() - config_.learning_rate * m;
    } else {
      auto [s_it, unused] = second_.try_emplace(key, Eigen::ArrayXd::Zero(w.size()));
      Eigen::ArrayXd& s = s_it->second;
      m = config_.beta1 * m + (1.0 - config_.beta1) * g;
      s = config_.beta2 * s + (1.0 - config_.beta2) * g.square();
      const Eigen::ArrayXd m_hat = m / (1.0 - std::pow(config_.beta1, t));
      const Eigen::ArrayXd s_hat = s / (1.0 - std::pow(config_.beta2, t));
      next = w.values() - config_.learning_rate * m_hat / (s_hat.sqrt() + config_.epsilon);
    }
    if (!next.isFinite().all()) throw NonFiniteError("optimizer update of \"" + key + "\"", key);
    updated.emplace(key, Tensor(w.shape(), std::move(next)));
  }
  return updated;
}

ModelConfig effective_model(const ModelConfig& model, const TrainConfig& train) {
  ModelConfig out = model;
  if (out.norm) {
    out.norm->sigma = train.sigma;
    out.norm->lambda_l1 = train.lambda_l1;
  }
  return out;
}

void check_compatible(const ModelConfig& model, const Dataset& data) {
  const auto fail = [](const std::string& what) { throw ContractError("model/dataset: " + what); };
  if (model.classes != data.classes) {
    fail("model has " + std::to_string(model.classes) + " classes, dataset " +
         std::to_string(data.classes));
  }
  switch (model.kind) {
    case ModelKind::kMlp:
      // Image inputs are flattened row-major.
      if (!data.inputs ||
          data.inputs->size() / data.inputs->extent(0) != model.input_width) {
        fail("mlp needs " + std::to_string(model.input_width) + " features per example");
      }
      break;
    case ModelKind::kConvNet:
      if (!data.inputs || data.inputs->rank() != 4 ||
          data.inputs->shape() != Shape{data.inputs->extent(0), model.in_channels, model.height,
                                        model.width}) {
        fail("convnet input extents differ from the dataset's");
      }
      break;
    case ModelKind::kCharLstm:
      if (data.handle.kind != DatasetKind::kTinyChars ||
          model.input_width != static_cast<Index>(data.vocabulary.size())) {
        fail("charlstm needs a character corpus with vocabulary " +
             std::to_string(model.input_width));
      }
      break;
  }
}

BatchResult run_batch(const ModelConfig& model, const ParamSet& params, const Dataset& data,
                      const std::vector<Index>& rows, const TrainConfig& train,
                      bool with_gradients) {
  if (rows.empty()) throw ContractError("run_batch: empty batch");
  Tape tape;
  const ParamVars vars = bind(tape, params);
  Pass pass = model.kind == ModelKind::kCharLstm ? predict_chars(model, vars, data, rows, tape)
                                                 : classify(model, vars, data, rows, tape);
  std::vector<Var> activations;
  std::vector<NormState> states;
  for (const NormTrace& trace : pass.norms) {
    activations.push_back(penalty_source(trace, train.l1_target));
    states.push_back(trace.state);
  }
  const Var penalty = ad::l1_activation_penalty(tape, activations, train.lambda_l1);
  const Var objective = ad::total_objective(pass.loss, penalty);

  BatchResult result;
  result.loss = pass.loss.value().item();
  result.l1_penalty = penalty.value().item();
  result.accuracy = pass.correct / pass.predictions;
  result.mean_abs_v = mean_abs_v(states);
  result.examples = static_cast<Index>(rows.size());
  if (with_gradients) {
    const Gradients grads = tape.backward(objective);
    for (const auto& [key, var] : vars) result.grads.emplace(key, grads.of(var));
  }
  return result;
}

std::vector<Index> epoch_order(const std::vector<Index>& train_indices, std::uint64_t seed,
                               int epoch) {
  std::vector<Index> order = train_indices;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

EpochResult train_epoch(const ModelConfig& model, const ParamSet& params, const Dataset& data,
                        const TrainConfig& train, Optimizer& optimizer, int epoch,
                        Index first_step) {
  validate_train_config(train);
  const ModelConfig effective = effective_model(model, train);
  const std::vector<Index> order = epoch_order(data.handle.train_indices, train.seed, epoch);
  EpochResult result{params, {}};
  Index step = first_step;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(train.batch_size), ++step) {
    const auto end = std::min(order.size(), begin + static_cast<std::size_t>(train.batch_size));
    const std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                  order.begin() + static_cast<std::ptrdiff_t>(end));
    const auto start = Clock::now();
    try {
      BatchResult batch = run_batch(effective, result.params, data, rows, train, true);
      result.params = optimizer.step(result.params, batch.grads);
      result.records.push_back({step, epoch, "train", batch.loss, batch.l1_penalty,
                                batch.accuracy, batch.mean_abs_v, elapsed_ms(start, train)});
    } catch (const NumericalError& e) {
      throw TrainingAborted("step " + std::to_string(step) + ": " + e.what(), e.where(),
                            abort_record(step, epoch, "train"));
    }
  }
  return result;
}

MetricsRecord evaluate(const ModelConfig& model, const ParamSet& params, const Dataset& data,
                       const std::vector<Index>& rows, const TrainConfig& train,
                       const std::string& split, Index step, int epoch) {
  if (rows.empty()) throw ContractError("evaluate: empty split \"" + split + "\"");
  const ModelConfig effective = effective_model(model, train);
  const auto start = Clock::now();
  MetricsRecord record{step, epoch, split, 0.0, 0.0, 0.0, 0.0, 0.0};
  double weight = 0.0;
  try {
    for (std::size_t begin = 0; begin < rows.size(); begin += static_cast<std::size_t>(train.batch_size)) {
      const auto end = std::min(rows.size(), begin + static_cast<std::size_t>(train.batch_size));
      const std::vector<Index> chunk(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                     rows.begin() + static_cast<std::ptrdiff_t>(end));
      const BatchResult batch = run_batch(effective, params, data, chunk, train, false);
      const auto n = static_cast<double>(batch.examples);
      record.loss += n * batch.loss;
      record.l1_penalty += n * batch.l1_penalty;
      record.accuracy += n * batch.accuracy;
      record.mean_abs_v += n * batch.mean_abs_v;
      weight += n;
    }
  } catch (const NumericalError& e) {
    throw TrainingAborted(split + " evaluation after step " + std::to_string(step) + ": " +
                              e.what(),
                          e.where(), abort_record(step, epoch, split));
  }
  record.loss /= weight;
  record.l1_penalty /= weight;
  record.accuracy /= weight;
  record.mean_abs_v /= weight;
  record.wall_ms = elapsed_ms(start, train);
  return record;
}

}  // namespace normkit
