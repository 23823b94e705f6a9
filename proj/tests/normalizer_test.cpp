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
#include <random>

#include <gtest/gtest.h>

#include "normkit/gradient_suite.hpp"
#include "normkit/normalizer.hpp"
#include "normkit/ops.hpp"
#include "test_util.hpp"

namespace normkit {
namespace {

using testing::BruteForceSet;
using testing::RandomTensor;

const std::vector<Preset> kPresets{Preset::kBN, Preset::kLN, Preset::kDN, Preset::kDNNoCenter,
                                   Preset::kIdentityLike};

NormalizerSpec Spec(Preset p, const Shape& shape, double sigma, DnWindow window = {1, 3, 3}) {
  PresetOptions o;
  o.rank = static_cast<Index>(shape.size());
  o.channels = shape[1];
  o.sigma = sigma;
  o.dn_window = window;
  o.allow_zero_sigma = sigma == 0.0;
  return spec_preset(p, o);
}

TEST(CenterTest, DocumentedExamples) {
  const NormRegion row{false, ChannelRange::all(), SpatialRange::none()};
  const Tensor v = center(Tensor({1, 3}, {1, 2, 3}), row);
  EXPECT_DOUBLE_EQ(v[0], -1.0);
  EXPECT_DOUBLE_EQ(v[1], 0.0);
  EXPECT_DOUBLE_EQ(v[2], 1.0);
  const Tensor c = center(Tensor::filled({2, 3, 4, 4}, 0.7), NormRegion{false, ChannelRange::window(3), SpatialRange::window(3, 3)});
  EXPECT_LE(c.values().abs().maxCoeff(), 1e-15);
  const Tensor z({2}, {4, 5});
  EXPECT_TRUE(bitwise_equal(center(z, std::nullopt), z));
}

TEST(CenterTest, BatchNormRegionMatchesLoopOracle) {
  const Tensor z = RandomTensor({2, 3, 4, 4}, 5);
  const NormRegion bn{true, ChannelRange::none(), SpatialRange::all()};
  const Tensor v = center(z, bn);
  for (Index flat = 0; flat < z.size(); ++flat) {
    const auto set = BruteForceSet(bn, z.shape(), unravel_index(z.shape(), flat));
    double mean = 0.0;
    for (Index k : set) mean += z[k];
    mean /= static_cast<double>(set.size());
    EXPECT_NEAR(v[flat], z[flat] - mean, 1e-12);
  }
}

TEST(CenterTest, InvariantToGlobalShift) {
  const NormRegion global{true, ChannelRange::all(), SpatialRange::all()};
  const Tensor z = RandomTensor({3, 2, 4, 4}, 6);
  EXPECT_LE(max_abs_diff(center(add_scalar(z, 12.5), global), center(z, global)), 1e-12);
}

TEST(DivisiveTest, DocumentedExamples) {
  const NormRegion both{false, ChannelRange::all(), SpatialRange::none()};
  const DivisiveResult zero = divisive(Tensor::zeros({1, 4}), both, 1.0);
  EXPECT_EQ(zero.y.values().abs().maxCoeff(), 0.0);

  const DivisiveResult r = divisive(Tensor({1, 2}, {3, 4}), both, 0.0);
  EXPECT_NEAR(r.state.denom[0], 3.5355339059327378, 1e-15);
  EXPECT_NEAR(r.y[0], 0.848528137423857, 1e-15);
  EXPECT_NEAR(r.y[1], 1.131370849898476, 1e-15);

  const DivisiveResult big = divisive(Tensor({1, 2}, {1, -1}), both, 1000.0);
  EXPECT_NEAR(big.y[0], 1e-3, 1e-6);
  EXPECT_NEAR(big.y[1], -1e-3, 1e-6);
}

TEST(DivisiveTest, ZeroSigmaOnZeroSetIsZeroDenominator) {
  const NormRegion window{false, ChannelRange::none(), SpatialRange::window(3, 3)};
  Eigen::ArrayXd values = Eigen::ArrayXd::Zero(36);
  values[35] = 1.0;  // only the far corner is nonzero
  EXPECT_THROW(divisive(Tensor({1, 1, 6, 6}, values), window, 0.0), ZeroDenominatorError);
  EXPECT_NO_THROW(divisive(Tensor({1, 1, 6, 6}, values), window, 0.1));
}

TEST(NormalizeForwardTest, BatchNormOnTwoExamples) {
  const NormalizerSpec spec = Spec(Preset::kBN, {2, 1}, 0.0);
  const NormResult r = normalize_forward(Tensor({2, 1}, {1, 3}), spec);
  EXPECT_DOUBLE_EQ(r.state.v[0], -1.0);
  EXPECT_DOUBLE_EQ(r.state.v[1], 1.0);
  EXPECT_DOUBLE_EQ(r.state.denom[0], 1.0);
  EXPECT_DOUBLE_EQ(r.out[0], -1.0);
  EXPECT_DOUBLE_EQ(r.out[1], 1.0);
}

TEST(NormalizeForwardTest, IdentityAffineEqualsPlain) {
  const Tensor z = RandomTensor({3, 4, 5, 5}, 8);
  for (Preset p : kPresets) {
    NormalizerSpec plain = Spec(p, z.shape(), 1.0);
    NormalizerSpec affine = plain;
    affine.affine = true;
    affine.gain = Tensor::filled(affine_shape(z.shape()), 1.0);
    affine.bias = Tensor::zeros(affine_shape(z.shape()));
    EXPECT_TRUE(bitwise_equal(normalize_forward(z, plain).out, normalize_forward(z, affine).out))
        << name(p);
  }
}

TEST(NormalizeForwardTest, AffineAppliesPerChannel) {
  const Tensor z = RandomTensor({2, 3, 2, 2}, 9);
  NormalizerSpec spec = Spec(Preset::kLN, z.shape(), 1.0);
  const Tensor y = normalize_forward(z, spec).out;
  spec.affine = true;
  spec.gain = Tensor({1, 3, 1, 1}, {2, 3, 4});
  spec.bias = Tensor({1, 3, 1, 1}, {-1, 0, 1});
  const Tensor out = normalize_forward(z, spec).out;
  for (Index flat = 0; flat < z.size(); ++flat) {
    const Index c = unravel_index(z.shape(), flat)[1];
    EXPECT_DOUBLE_EQ(out[flat], (*spec.gain)[c] * y[flat] + (*spec.bias)[c]);
  }
}

TEST(NormalizeForwardTest, FullCoverageDnIsBitwiseLn) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor z = RandomTensor({1 + static_cast<Index>(seed % 3), 3, 5, 4}, seed);
    const NormalizerSpec ln = Spec(Preset::kLN, z.shape(), 0.5);
    const NormalizerSpec dn = Spec(Preset::kDN, z.shape(), 0.5, {5, 9, 7});
    EXPECT_TRUE(bitwise_equal(normalize_forward(z, ln).out, normalize_forward(z, dn).out));
    for (Index flat = 0; flat < z.size(); flat += 7) {
      const auto j = unravel_index(z.shape(), flat);
      EXPECT_EQ(BruteForceSet(*dn.region_a, z.shape(), j), BruteForceSet(*ln.region_a, z.shape(), j));
    }
  }
}

TEST(NormalizeForwardTest, BatchOfOneBnEqualsPerExampleStatistics) {
  // With N = 1 the batch axis adds nothing: BN's set for (0, c, h, w) is
  // exactly channel c's spatial plane of the single example.
  const Tensor z = RandomTensor({1, 4, 5, 5}, 10);
  NormalizerSpec bn = Spec(Preset::kBN, z.shape(), 0.0);
  NormalizerSpec per_example = bn;
  const NormRegion plane{false, ChannelRange::none(), SpatialRange::all()};
  per_example.region_a = plane;
  per_example.region_b = plane;
  EXPECT_TRUE(bitwise_equal(normalize_forward(z, bn).out, normalize_forward(z, per_example).out));
}

TEST(NormalizeForwardTest, DenomIsAtLeastSigma) {
  const Tensor z = RandomTensor({2, 3, 4, 4}, 12, 0.0, 0.01);
  for (Preset p : kPresets) {
    const NormResult r = normalize_forward(z, Spec(p, z.shape(), 0.3));
    EXPECT_GE(r.state.denom.values().minCoeff(), 0.3) << name(p);
    EXPECT_EQ(r.state.v.shape(), z.shape());
    EXPECT_EQ(r.state.denom.shape(), z.shape());
  }
}

TEST(NormalizeBackwardTest, ZeroUpstreamGivesZeroGradients) {
  const Tensor z = RandomTensor({2, 3, 4, 4}, 13);
  NormalizerSpec spec = Spec(Preset::kDN, z.shape(), 1.0);
  spec.affine = true;
  spec.gain = Tensor::filled({1, 3, 1, 1}, 1.3);
  spec.bias = Tensor::zeros({1, 3, 1, 1});
  const NormResult r = normalize_forward(z, spec);
  const NormGradients g = normalize_backward(r.state, spec, Tensor::zeros(z.shape()));
  EXPECT_EQ(g.dz.values().abs().maxCoeff(), 0.0);
  EXPECT_EQ(g.dgain->values().abs().maxCoeff(), 0.0);
  EXPECT_EQ(g.dbias->values().abs().maxCoeff(), 0.0);
}

TEST(NormalizeBackwardTest, MismatchIsAContractError) {
  const Tensor z = RandomTensor({2, 3}, 14);
  const NormalizerSpec spec = Spec(Preset::kBN, z.shape(), 1.0);
  const NormResult r = normalize_forward(z, spec);
  EXPECT_THROW(normalize_backward(r.state, spec, Tensor::zeros({3, 2})), ContractError);
}

TEST(NormalizeBackwardTest, BatchNormMatrixAgreesWithTapeAndFiniteDifferences) {
  GradientSuiteOptions options;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradientCase c{Preset::kBN, 1.0, true, false, seed, {4, 3}};
    const GradientCaseResult r = run_gradient_case(c, options);
    EXPECT_LE(r.analytic_vs_tape, 1e-12);
    EXPECT_LE(r.analytic_vs_numeric, 1e-6);
    EXPECT_LE(r.tape_vs_numeric, 1e-6);
  }
}

TEST(NormalizeBackwardTest, OneSeedOfEveryConfiguration) {
  GradientSuiteOptions options;
  options.seeds = 1;
  const GradientSuiteReport report = run_gradient_suite(options);
  EXPECT_EQ(report.results.size(), 5u * 2u * 2u * 2u);
  for (const auto& r : report.results) EXPECT_TRUE(r.passed) << describe(r.gradient_case);
}

TEST(SpecPresetTest, RegionsFollowThePresetTable) {
  const NormalizerSpec bn = Spec(Preset::kBN, {4, 3, 5, 5}, 1.0);
  EXPECT_TRUE(bn.region_b.over_batch);
  EXPECT_EQ(bn.region_b.channels.coverage, Coverage::kNone);
  EXPECT_EQ(bn.region_b.space.coverage, Coverage::kAll);
  EXPECT_EQ(bn.region_a, bn.region_b);

  const NormalizerSpec ln = Spec(Preset::kLN, {4, 7}, 1.0);
  EXPECT_FALSE(ln.region_b.over_batch);
  EXPECT_EQ(ln.region_b.channels.coverage, Coverage::kAll);
  const auto row = resolve_region(ln.region_b, {4, 7}, {2, 3});
  EXPECT_EQ(row.size(), 7u);
  for (const auto& k : row) EXPECT_EQ(k[0], 2);

  const NormalizerSpec dn = Spec(Preset::kDN, {2, 8, 6, 6}, 1.0, {3, 5, 5});
  EXPECT_EQ(dn.region_b.channels, ChannelRange::window(3));
  EXPECT_EQ(dn.region_b.space, SpatialRange::window(5, 5));
  EXPECT_FALSE(dn.region_b.over_batch);

  EXPECT_FALSE(Spec(Preset::kDNNoCenter, {2, 3, 4, 4}, 1.0).region_a.has_value());
  const NormalizerSpec id = Spec(Preset::kIdentityLike, {2, 3, 4, 4}, 1.0);
  EXPECT_FALSE(id.region_a.has_value());
  EXPECT_EQ(region_count(id.region_b, {2, 3, 4, 4}, {1, 1, 1, 1}), 1);
}

TEST(SpecPresetTest, DefaultDnWindowIsAllChannelsFiveByFive) {
  const NormalizerSpec dn = Spec(Preset::kDN, {2, 8, 9, 9}, 1.0, DnWindow{});
  EXPECT_EQ(dn.region_b.channels.coverage, Coverage::kAll);
  EXPECT_EQ(dn.region_b.space, SpatialRange::window(5, 5));
}

TEST(SpecPresetTest, IdentityLikeIsNotTheIdentity) {
  const Tensor z({1, 2}, {0.5, -2.0});
  const Tensor y = normalize_forward(z, Spec(Preset::kIdentityLike, z.shape(), 1.0)).out;
  EXPECT_DOUBLE_EQ(y[0], 0.5 / std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(y[1], -2.0 / std::sqrt(5.0));
}

TEST(ValidateSpecTest, RejectsBadSpecs) {
  PresetOptions o;
  o.channels = 3;
  o.sigma = -1.0;
  EXPECT_THROW(spec_preset(Preset::kBN, o), ContractError);
  o.sigma = 0.0;
  EXPECT_THROW(spec_preset(Preset::kBN, o), ContractError);
  o.allow_zero_sigma = true;
  EXPECT_NO_THROW(spec_preset(Preset::kBN, o));
  o.sigma = 1.0;
  o.dn_window = {2, 5, 5};
  EXPECT_THROW(spec_preset(Preset::kDN, o), ContractError);

  NormalizerSpec spec = Spec(Preset::kLN, {2, 3, 4, 4}, 1.0);
  spec.gain = Tensor::filled({1, 3, 1, 1}, 1.0);
  EXPECT_THROW(validate_spec(spec), ContractError);
  spec.affine = true;
  spec.bias = Tensor::zeros({1, 2, 1, 1});
  EXPECT_THROW(validate_spec(spec, {2, 3, 4, 4}), ShapeError);
}

// Random shape and preset per draw; sigma includes 0 where the sets are
// never all-zero for continuous inputs.
struct Draw {
  Tensor z;
  NormalizerSpec spec;
};

Draw RandomDraw(std::uint64_t i) {
  std::mt19937_64 rng(i);
  const bool matrix = i % 3 == 0;
  const Shape shape = matrix ? Shape{1 + static_cast<Index>(rng() % 4), 1 + static_cast<Index>(rng() % 6)}
                             : Shape{1 + static_cast<Index>(rng() % 3), 1 + static_cast<Index>(rng() % 4),
                                     1 + static_cast<Index>(rng() % 5), 1 + static_cast<Index>(rng() % 5)};
  const double sigmas[] = {0.0, 0.05, 1.0, 4.0};
  const Preset preset = kPresets[rng() % kPresets.size()];
  const double sigma = sigmas[rng() % 4];
  const double scale = std::exp(std::uniform_real_distribution<double>(-3, 3)(rng));
  Draw d{RandomTensor(shape, i + 7777, 0.3, scale), Spec(preset, shape, sigma)};
  return d;
}

TEST(NormalizerPropertyTest, OutputBoundedBySquareRootOfSetSize) {
  int checked = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const Draw d = RandomDraw(i);
    NormResult r;
    try {
      r = normalize_forward(d.z, d.spec);
    } catch (const ZeroDenominatorError&) {
      // sigma = 0 on a set whose centered values vanish (e.g. BN, N = 1).
      continue;
    }
    for (Index flat = 0; flat < d.z.size(); ++flat) {
      const auto count = region_count(d.spec.region_b, d.z.shape(), unravel_index(d.z.shape(), flat));
      ASSERT_LE(std::abs(r.out[flat]), std::sqrt(static_cast<double>(count)) * (1 + 1e-12))
          << "draw " << i;
    }
    ++checked;
  }
  EXPECT_GT(checked, 900);
}

TEST(NormalizerPropertyTest, OutputBoundedByCenteredValueOverSigma) {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Draw d = RandomDraw(i);
    if (d.spec.sigma == 0.0) d.spec.sigma = 0.5;
    const NormResult r = normalize_forward(d.z, d.spec);
    for (Index flat = 0; flat < d.z.size(); ++flat) {
      ASSERT_LE(std::abs(r.out[flat]), std::abs(r.state.v[flat]) / d.spec.sigma * (1 + 1e-12))
          << "draw " << i;
    }
  }
}

TEST(NormalizerPropertyTest, BatchNormStatisticsAtZeroSigma) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor z = RandomTensor({4, 3, 5, 5}, seed, 2.0, 3.0);
    const Tensor y = normalize_forward(z, Spec(Preset::kBN, z.shape(), 0.0)).out;
    for (Index c = 0; c < 3; ++c) {
      double m1 = 0.0, m2 = 0.0;
      for (Index n = 0; n < 4; ++n)
        for (Index h = 0; h < 5; ++h)
          for (Index w = 0; w < 5; ++w) {
            const double v = y.at({n, c, h, w});
            m1 += v;
            m2 += v * v;
          }
      EXPECT_LE(std::abs(m1 / 100.0), 1e-10);
      EXPECT_LE(std::abs(m2 / 100.0 - 1.0), 1e-10);
    }
  }
}

TEST(NormalizerPropertyTest, ScaleInvariantOnlyWithoutSmoothing) {
  for (Preset p : {Preset::kBN, Preset::kLN, Preset::kDN}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Tensor z = RandomTensor({3, 4, 5, 5}, seed + 40);
      const NormalizerSpec sharp = Spec(p, z.shape(), 0.0);
      const Tensor base = normalize_forward(z, sharp).out;
      for (double c : {0.5, 2.0, 3.0}) {
        EXPECT_LE(max_abs_diff(normalize_forward(scale(z, c), sharp).out, base), 1e-10) << name(p);
      }
      const NormalizerSpec smooth = Spec(p, z.shape(), 1.0);
      EXPECT_GE(max_abs_diff(normalize_forward(scale(z, 2.0), smooth).out,
                             normalize_forward(z, smooth).out),
                1e-3)
          << name(p);
    }
  }
}

}  // namespace
}  // namespace normkit
