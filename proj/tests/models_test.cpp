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

#include <cmath>

#include <gtest/gtest.h>

#include "normkit/dataset.hpp"
#include "normkit/grad_check.hpp"
#include "normkit/models.hpp"
#include "normkit/ops.hpp"
#include "test_util.hpp"

namespace normkit {
namespace {

using testing::RandomTensor;

NormSettings Norm(Preset preset, double sigma = 1.0) {
  NormSettings n;
  n.preset = preset;
  n.sigma = sigma;
  n.dn_window = {3, 3, 3};
  return n;
}

ModelConfig Mlp(std::optional<NormSettings> norm = Norm(Preset::kBN)) {
  ModelConfig c;
  c.kind = ModelKind::kMlp;
  c.input_width = 4;
  c.hidden = {5, 3};
  c.classes = 3;
  c.norm = norm;
  return c;
}

ModelConfig ConvNet(std::optional<NormSettings> norm = Norm(Preset::kBN)) {
  ModelConfig c;
  c.kind = ModelKind::kConvNet;
  c.in_channels = 2;
  c.height = 4;
  c.width = 4;
  c.hidden = {3};
  c.kernel = 3;
  c.classes = 2;
  c.norm = norm;
  return c;
}

ModelConfig Lstm(std::optional<NormSettings> norm = Norm(Preset::kLN)) {
  ModelConfig c;
  c.kind = ModelKind::kCharLstm;
  c.input_width = 5;
  c.lstm_hidden = 3;
  c.classes = 5;
  c.norm = norm;
  return c;
}

ParamSet Zeroed(ParamSet params) {
  for (auto& [name, t] : params) {
    if (name.ends_with(".gain")) continue;
    t = Tensor::zeros(t.shape());
  }
  return params;
}

bool SameParams(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    auto it = b.find(name);
    if (it == b.end() || !bitwise_equal(t, it->second)) return false;
  }
  return true;
}

TEST(InitParamsTest, DeterministicPerSeed) {
  for (const ModelConfig& c : {Mlp(), ConvNet(), Lstm()}) {
    EXPECT_TRUE(SameParams(init_params(c, 3), init_params(c, 3)));
    EXPECT_FALSE(SameParams(init_params(c, 3), init_params(c, 4)));
  }
}

TEST(InitParamsTest, GainsOneBiasesZeroWeightsBounded) {
  for (const ModelConfig& c : {Mlp(), ConvNet(), Lstm()}) {
    int gains = 0;
    for (const auto& [name, t] : init_params(c, 11)) {
      if (name.ends_with(".gain")) {
        ++gains;
        EXPECT_EQ(t.values().minCoeff(), 1.0);
        EXPECT_EQ(t.values().maxCoeff(), 1.0);
      } else if (name.ends_with("bias")) {
        EXPECT_EQ(t.values().abs().maxCoeff(), 0.0) << name;
      } else {
        EXPECT_GT(t.values().abs().maxCoeff(), 0.0) << name;
        EXPECT_LE(t.values().abs().maxCoeff(), 1.0) << name;
      }
    }
    EXPECT_GT(gains, 0);
  }
}

TEST(InitParamsTest, NoAffineMeansNoGains) {
  NormSettings n = Norm(Preset::kLN);
  n.affine = false;
  for (const auto& [name, t] : init_params(Mlp(n), 1)) EXPECT_FALSE(name.ends_with(".gain"));
}

TEST(ValidateModelTest, RejectsBadConfigs) {
  ModelConfig c = Mlp();
  c.hidden.clear();
  EXPECT_THROW(validate_model_config(c), ContractError);
  c = Mlp();
  c.classes = 1;
  EXPECT_THROW(validate_model_config(c), ContractError);
  c = ConvNet();
  c.kernel = 2;
  EXPECT_THROW(validate_model_config(c), ContractError);
  c = ConvNet();
  c.hidden = {2, 2, 2};
  EXPECT_THROW(validate_model_config(c), ContractError);
}

TEST(MlpTest, ZeroWeightsGiveZeroLogits) {
  const ModelConfig c = Mlp();
  const Forward f = forward(Zeroed(init_params(c, 0)), RandomTensor({3, 4}, 1), c);
  EXPECT_EQ(f.logits.shape(), (Shape{3, 3}));
  EXPECT_EQ(f.logits.values().abs().maxCoeff(), 0.0);
  EXPECT_EQ(f.states.size(), 2u);
}

TEST(MlpTest, MatchesHandComposedLayerNorm) {
  ModelConfig c = Mlp(Norm(Preset::kLN));
  c.hidden = {6};
  const ParamSet p = init_params(c, 5);
  const Tensor x = RandomTensor({4, 4}, 6);
  const Tensor z = add(matmul(x, p.at("layer0.weight")), p.at("layer0.bias"));
  const NormResult n = normalize_forward(z, layer_spec(c, 2, 6));
  const Tensor expected = add(matmul(relu(n.out), p.at("head.weight")), p.at("head.bias"));
  EXPECT_LE(max_abs_diff(forward(p, x, c).logits, expected), 1e-14);

  ModelConfig plain = c;
  plain.norm.reset();
  const Tensor raw = add(matmul(relu(z), p.at("head.weight")), p.at("head.bias"));
  EXPECT_LE(max_abs_diff(forward(p, x, plain).logits, raw), 1e-14);
}

TEST(MlpTest, DuplicatedRowsUnderLayerNormGiveDuplicatedLogits) {
  const ModelConfig c = Mlp(Norm(Preset::kLN));
  const Tensor row = RandomTensor({1, 4}, 7);
  Eigen::ArrayXd values(12);
  values << row.values(), row.values(), row.values();
  const Tensor logits = forward(init_params(c, 2), Tensor({3, 4}, values), c).logits;
  for (Index k = 0; k < 3; ++k) {
    EXPECT_EQ(logits.at({0, k}), logits.at({1, k}));
    EXPECT_EQ(logits.at({0, k}), logits.at({2, k}));
  }
}

TEST(MlpTest, WrongWidthIsAShapeError) {
  const ModelConfig c = Mlp();
  EXPECT_THROW(forward(init_params(c, 0), RandomTensor({2, 5}, 1), c), ShapeError);
}

TEST(ConvNetTest, MatchesHandComposedBatchNorm) {
  ModelConfig c = ConvNet(Norm(Preset::kBN, 0.0));
  c.norm->allow_zero_sigma = true;
  c.kernel = 1;
  const ParamSet p = init_params(c, 8);
  const Tensor x = RandomTensor({3, 2, 4, 4}, 9);
  const Tensor z = add(conv2d(x, p.at("conv0.weight"), 0, 1), p.at("conv0.bias"));
  const Tensor h = mean_pool2x2(relu(normalize_forward(z, layer_spec(c, 4, 3)).out));
  const Tensor flat(Shape{3, 12}, h.values());
  const Tensor expected = add(matmul(flat, p.at("head.weight")), p.at("head.bias"));
  EXPECT_LE(max_abs_diff(forward(p, x, c).logits, expected), 1e-14);
}

TEST(ConvNetTest, ZeroInputGivesHeadBias) {
  const ModelConfig c = ConvNet(Norm(Preset::kDN));
  ParamSet p = init_params(c, 1);
  p.at("head.bias") = Tensor({1, 2}, {0.25, -0.5});
  const Tensor logits = forward(p, Tensor::zeros({2, 2, 4, 4}), c).logits;
  for (Index n = 0; n < 2; ++n) {
    EXPECT_EQ(logits.at({n, 0}), 0.25);
    EXPECT_EQ(logits.at({n, 1}), -0.5);
  }
}

TEST(ConvNetTest, BatchPermutationPermutesLogitsUnderBatchNorm) {
  const ModelConfig c = ConvNet();
  const ParamSet p = init_params(c, 3);
  const Tensor x = RandomTensor({3, 2, 4, 4}, 4);
  const std::vector<Index> perm{2, 0, 1};
  const Tensor a = forward(p, gather_rows(x, perm), c).logits;
  const Tensor b = gather_rows(forward(p, x, c).logits, perm);
  EXPECT_LE(max_abs_diff(a, b), 1e-13);
}

TEST(ModelsTest, PresetsChangeOnlyTheRegions) {
  const Tensor x = RandomTensor({2, 2, 4, 4}, 12);
  for (Preset p : {Preset::kBN, Preset::kLN, Preset::kDN, Preset::kDNNoCenter}) {
    const ModelConfig c = ConvNet(Norm(p));
    const Forward f = forward(init_params(c, 0), x, c);
    EXPECT_EQ(f.logits.shape(), (Shape{2, 2}));
    EXPECT_EQ(f.states.size(), 1u);
  }
}

TEST(ModelsTest, ForwardIsDeterministic) {
  for (const ModelConfig& c : {Mlp(Norm(Preset::kDN)), ConvNet(Norm(Preset::kLN))}) {
    const ParamSet p = init_params(c, 1);
    const Tensor x = c.kind == ModelKind::kMlp ? RandomTensor({3, 4}, 2) : RandomTensor({3, 2, 4, 4}, 2);
    EXPECT_TRUE(bitwise_equal(forward(p, x, c).logits, forward(p, x, c).logits));
  }
}

struct LstmStep {
  Tensor h, c;
};

LstmStep RunCell(const ParamSet& p, const ModelConfig& config, const Tensor& x, const Tensor& h,
                 const Tensor& c) {
  Tape tape;
  const ParamVars vars = normkit::bind(tape, p);
  const LstmState s = lstm_cell_forward(vars, tape.leaf(x), tape.leaf(h), tape.leaf(c), config);
  EXPECT_EQ(s.norms.size(), config.norm ? 4u : 0u);
  return {s.h.value(), s.c.value()};
}

TEST(LstmTest, ZeroWeightsHalveTheCell) {
  const ModelConfig config = Lstm();
  const ParamSet p = Zeroed(init_params(config, 0));
  const Tensor c_prev({2, 3}, {1, -2, 0.5, 3, 0, -1});
  const LstmStep s = RunCell(p, config, RandomTensor({2, 5}, 1), RandomTensor({2, 3}, 2), c_prev);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(s.c[i], 0.5 * c_prev[i]);
    EXPECT_DOUBLE_EQ(s.h[i], 0.5 * std::tanh(0.5 * c_prev[i]));
  }
  const LstmStep zero = RunCell(p, config, RandomTensor({2, 5}, 1), RandomTensor({2, 3}, 2),
                                Tensor::zeros({2, 3}));
  EXPECT_EQ(zero.h.values().abs().maxCoeff(), 0.0);
}

TEST(LstmTest, GatesAreNormalizedSeparately) {
  const ModelConfig config = Lstm(Norm(Preset::kLN, 0.0));
  ModelConfig with_zero = config;
  with_zero.norm->allow_zero_sigma = true;
  Tape tape;
  const ParamVars vars = normkit::bind(tape, init_params(with_zero, 3));
  const LstmState s = lstm_cell_forward(vars, tape.leaf(RandomTensor({2, 5}, 4)),
                                        tape.leaf(RandomTensor({2, 3}, 5)),
                                        tape.leaf(Tensor::zeros({2, 3})), with_zero);
  ASSERT_EQ(s.norms.size(), 4u);
  for (const NormTrace& t : s.norms) {
    EXPECT_EQ(t.out.shape(), (Shape{2, 3}));
    for (Index n = 0; n < 2; ++n) {
      double m = 0.0;
      for (Index k = 0; k < 3; ++k) m += t.out.value().at({n, k});
      EXPECT_NEAR(m, 0.0, 1e-12) << t.layer;
    }
  }
}

TEST(LstmTest, InconsistentShapesAreShapeErrors) {
  const ModelConfig config = Lstm();
  const ParamSet p = init_params(config, 0);
  Tape tape;
  const ParamVars vars = normkit::bind(tape, p);
  EXPECT_THROW(lstm_cell_forward(vars, tape.leaf(Tensor::zeros({2, 5})), tape.leaf(Tensor::zeros({2, 4})),
                                 tape.leaf(Tensor::zeros({2, 3})), config),
               ShapeError);
}

// Finite differences with respect to one named parameter, the rest fixed.
double ParamGradCheck(const ModelConfig& config, const ParamSet& params, const std::string& name,
                      const std::function<Var(const ParamVars&, Tape&)>& loss) {
  const auto f = [&](Tape& tape, const Var& w) {
    ParamVars vars;
    for (const auto& [n, t] : params) vars.emplace(n, n == name ? w : tape.leaf(t));
    return loss(vars, tape);
  };
  (void)config;
  return grad_check(f, params.at(name));
}

Var WeightedLogits(const Var& logits, std::uint64_t seed) {
  return ad::sum(logits * logits.tape().leaf(RandomTensor(logits.shape(), seed)));
}

TEST(ModelGradCheckTest, EveryModelKindEveryParameter) {
  for (Preset preset : {Preset::kBN, Preset::kLN, Preset::kDN}) {
    for (const ModelConfig& c : {Mlp(Norm(preset)), ConvNet(Norm(preset, 0.5))}) {
      const ParamSet p = init_params(c, 21);
      const Tensor x = c.kind == ModelKind::kMlp ? RandomTensor({3, 4}, 22) : RandomTensor({2, 2, 4, 4}, 22);
      for (const auto& [name, t] : p) {
        if (preset == Preset::kBN && name.ends_with(".bias") && !name.starts_with("head")) {
          // Batch centering cancels a bias added just before BN, so the true
          // gradient is 0 and a relative check would only measure FD noise.
          Tape tape;
          const ParamVars vars = normkit::bind(tape, p);
          const Var loss = WeightedLogits(forward(vars, tape.leaf(x), c).logits, 23);
          EXPECT_LE(tape.backward(loss).of(vars.at(name)).values().abs().maxCoeff(), 1e-12) << name;
          continue;
        }
        const double err = ParamGradCheck(c, p, name, [&](const ParamVars& vars, Tape& tape) {
          return WeightedLogits(forward(vars, tape.leaf(x), c).logits, 23);
        });
        EXPECT_LE(err, 1e-5) << name << " " << normkit::name(c.kind) << " " << normkit::name(preset);
      }
      const auto f = [&](Tape& tape, const Var& xv) {
        return WeightedLogits(forward(normkit::bind(tape, p), xv, c).logits, 23);
      };
      EXPECT_LE(grad_check(f, x), 1e-5);
    }
  }
}

TEST(ModelGradCheckTest, LstmOneStep) {
  const ModelConfig c = Lstm();
  const ParamSet p = init_params(c, 31);
  const Tensor x = one_hot({1, 4, 0}, 5), h0 = RandomTensor({3, 3}, 32), c0 = RandomTensor({3, 3}, 33);
  const auto step = [&](const ParamVars& vars, Tape& tape) {
    const LstmState s = lstm_cell_forward(vars, tape.leaf(x), tape.leaf(h0), tape.leaf(c0), c);
    return ad::sum(ad::softmax_cross_entropy(lstm_logits(vars, s.h), {2, 0, 3})) +
           ad::sum(s.c * tape.leaf(RandomTensor({3, 3}, 34)));
  };
  for (const auto& [name, t] : p) EXPECT_LE(ParamGradCheck(c, p, name, step), 1e-5) << name;
  const auto wrt_h = [&](Tape& tape, const Var& h) {
    const LstmState s = lstm_cell_forward(normkit::bind(tape, p), tape.leaf(x), h, tape.leaf(c0), c);
    return ad::sum(s.h * s.c);
  };
  EXPECT_LE(grad_check(wrt_h, h0), 1e-6);
}

TEST(OneHotTest, RowsAndRange) {
  const Tensor t = one_hot({2, 0}, 3);
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  EXPECT_EQ(t.at({0, 2}), 1.0);
  EXPECT_EQ(t.at({1, 0}), 1.0);
  EXPECT_EQ(t.values().sum(), 2.0);
  EXPECT_THROW(one_hot({3}, 3), ContractError);
}

}  // namespace
}  // namespace normkit
