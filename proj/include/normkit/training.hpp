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

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "normkit/dataset.hpp"
#include "normkit/models.hpp"

namespace normkit {

enum class OptimizerKind { kSgd, kAdam };

/// Which activation the L1 penalty reads: the centered v (default), the
/// normalizer output, or the raw pre-activation z.
enum class L1Target { kV, kY, kZ };

std::string_view name(OptimizerKind kind);
std::string_view name(L1Target target);
OptimizerKind parse_optimizer(std::string_view text);
L1Target parse_l1_target(std::string_view text);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = 0.1;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index batch_size = 32;
  int epochs = 5;
  std::uint64_t seed = 0;
  double lambda_l1 = 0.0;
  double sigma = 1.0;  // replaces the model's NormSettings::sigma
  DatasetKind dataset = DatasetKind::kBlobs;
  L1Target l1_target = L1Target::kV;
  // Off by default so that repeated runs emit byte-identical metrics.
  bool record_wall_time = false;
};

void validate_train_config(const TrainConfig& config);

struct MetricsRecord {
  Index step = 0;
  int epoch = 0;
  std::string split;
  double loss = 0.0;  // cross-entropy only (per character for charlstm)
  double l1_penalty = 0.0;
  double accuracy = 0.0;
  double mean_abs_v = 0.0;
  double wall_ms = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

/// lambda * sum |v| / (total element count); 0 for no states.
Tensor l1_activation_penalty(const std::vector<NormState>& states, double lambda);
/// Mean over rows of -log softmax(logits)[target].
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets);
Tensor total_objective(const Tensor& loss, const Tensor& penalty);

/// Mean |v| over every element of every state; 0 for no states.
double mean_abs_v(const std::vector<NormState>& states);

/// Fraction of rows whose argmax (lowest index on ties) equals the target.
double accuracy(const Tensor& logits, const std::vector<int>& targets);

namespace ad {
/// Needs the tape for the empty case, where the penalty is a constant 0.
Var l1_activation_penalty(Tape& tape, const std::vector<Var>& activations, double lambda);
Var cross_entropy_loss(const Var& logits, const std::vector<int>& targets);
Var total_objective(const Var& loss, const Var& penalty);
}  // namespace ad

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config);

  /// Returns the updated parameters. `grads` must have exactly the keys of
  /// `params`.
  ParamSet step(const ParamSet& params, const ParamSet& grads);
  std::int64_t steps() const { return steps_; }

 private:
  TrainConfig config_;
  std::int64_t steps_ = 0;
  std::map<std::string, Eigen::ArrayXd> first_;
  std::map<std::string, Eigen::ArrayXd> second_;
};

/// A non-finite loss or a numerical failure during training. `record` holds
/// the step at which it happened; `layer` is empty when no layer is known.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& what, std::string layer, MetricsRecord record)
      : NumericalError(what), layer_(std::move(layer)), record_(std::move(record)) {}
  const std::string& layer() const { return layer_; }
  const MetricsRecord& record() const { return record_; }

 private:
  std::string layer_;
  MetricsRecord record_;
};

/// Model settings after the training knobs (sigma, lambda) are applied.
ModelConfig effective_model(const ModelConfig& model, const TrainConfig& train);

/// Checks that the dataset feeds the model: input extents and class count.
void check_compatible(const ModelConfig& model, const Dataset& data);

struct BatchResult {
  double loss = 0.0;
  double l1_penalty = 0.0;
  double accuracy = 0.0;
  double mean_abs_v = 0.0;
  Index examples = 0;
  ParamSet grads;  // empty when gradients were not requested
};

/// Forward (and optionally backward) over the examples `rows` of `data`.
BatchResult run_batch(const ModelConfig& model, const ParamSet& params, const Dataset& data,
                      const std::vector<Index>& rows, const TrainConfig& train,
                      bool with_gradients);

struct EpochResult {
  ParamSet params;
  std::vector<MetricsRecord> records;
};

/// One pass over the training split in a seed-derived order. `epoch` is
/// 1-based; `first_step` numbers the first batch.
EpochResult train_epoch(const ModelConfig& model, const ParamSet& params, const Dataset& data,
                        const TrainConfig& train, Optimizer& optimizer, int epoch,
                        Index first_step);

/// Metrics over `rows` in index order, in chunks of the batch size. `step`
/// and `epoch` are copied into the record.
MetricsRecord evaluate(const ModelConfig& model, const ParamSet& params, const Dataset& data,
                       const std::vector<Index>& rows, const TrainConfig& train,
                       const std::string& split, Index step, int epoch);

/// The order in which epoch `epoch` visits the training indices.
std::vector<Index> epoch_order(const std::vector<Index>& train_indices, std::uint64_t seed,
                               int epoch);

}  // namespace normkit
