/*
 * Copyright 2026 The vflda Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vflda/adversarial.h"
#include "vflda/errors.h"

namespace vflda::adversarial {
namespace {

using data::PartyRole;
using data::PartyView;

// Smoke experiment plus passive views over source and all target rows.
struct Fixture {
  experiment::Experiment e = testing::SmokeExperiment();
  PassiveModel model = testing::MakeModel(e);
  PartyView src =
      data::MakePartyView(e.data, e.split.source, PartyRole::kPassive, false);
  PartyView tgt = data::MakePartyView(e.data, e.split.TargetAll(),
                                      PartyRole::kPassive, false);
};

std::vector<std::size_t> Range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> out(b - a);
  std::iota(out.begin(), out.end(), a);
  return out;
}

double ManualAdvLoss(const GroupModels& models,
                     const grouping::GroupedBatch& s,
                     const grouping::GroupedBatch& t,
                     std::vector<double>* per_group = nullptr) {
  double total = 0;
  for (int i = 0; i < models.size(); ++i) {
    const auto& m = models.group(i);
    auto logit_t = m.discriminator.Forward(m.extractor.Forward(t.inputs[i]));
    auto logit_s = m.discriminator.Forward(m.extractor.Forward(s.inputs[i]));
    double lt = 0, ls = 0;
    for (Eigen::Index r = 0; r < logit_t.rows(); ++r)
      lt += nn::Bce(nn::Sigmoid(logit_t(r, 0)), 1).loss;
    for (Eigen::Index r = 0; r < logit_s.rows(); ++r)
      ls += nn::Bce(nn::Sigmoid(logit_s(r, 0)), 0).loss;
    const double term = lt / logit_t.rows() + ls / logit_s.rows();
    if (per_group) per_group->push_back(term);
    total += term;
  }
  return total;
}

TEST(Adversarial, LossDecomposesOverGroups) {
  Fixture f;
  const auto& enc = f.model.encoder();
  auto s = enc.Assemble(f.src, Range(0, 16));
  auto t = enc.Assemble(f.tgt, Range(0, 16));
  auto r = EvaluateDomainLoss(f.model.models(), s, t);
  std::vector<double> groups;
  const double expected = ManualAdvLoss(f.model.models(), s, t, &groups);
  EXPECT_NEAR(r.loss, expected, 1e-12);
  ASSERT_EQ(r.group_loss.size(), static_cast<std::size_t>(f.model.g()));
  for (int i = 0; i < f.model.g(); ++i) EXPECT_NEAR(r.group_loss[i], groups[i], 1e-12);
  EXPECT_NEAR(std::accumulate(r.group_loss.begin(), r.group_loss.end(), 0.0),
              r.loss, 1e-12);
}

// d L_adv / d theta by central differences on one parameter.
double NumericGrad(GroupModels models, int group, bool extractor, int layer,
                   int row, int col, const grouping::GroupedBatch& s,
                   const grouping::GroupedBatch& t) {
  const double h = 1e-6;
  auto param = [&](GroupModels& m) -> double& {
    auto& net = extractor ? m.mutable_group(group).extractor
                          : m.mutable_group(group).discriminator;
    return net.mutable_layers()[layer].weight(row, col);
  };
  GroupModels plus = models, minus = models;
  param(plus) += h;
  param(minus) -= h;
  return (ManualAdvLoss(plus, s, t) - ManualAdvLoss(minus, s, t)) / (2 * h);
}

TEST(Adversarial, ReversedGradientReachesExtractors) {
  Fixture f;
  const auto& enc = f.model.encoder();
  auto s = enc.Assemble(f.src, Range(0, 8));
  auto t = enc.Assemble(f.tgt, Range(0, 8));
  const double lambda = 0.7;
  auto grads = ComputeAdversarialGradients(f.model.models(), s, t, lambda);
  for (int g = 0; g < f.model.g(); ++g) {
    for (int layer = 0; layer < 2; ++layer) {
      const double num =
          NumericGrad(f.model.models(), g, true, layer, 0, 0, s, t);
      EXPECT_NEAR(grads.extractor[g].layers[layer].weight(0, 0),
                  -lambda * num, 1e-6) << "group " << g << " layer " << layer;
      const double dnum =
          NumericGrad(f.model.models(), g, false, layer, 0, 0, s, t);
      EXPECT_NEAR(grads.discriminator[g].layers[layer].weight(0, 0), dnum, 1e-6);
    }
  }
}

TEST(Adversarial, ZeroLambdaLeavesExtractorsAlone) {
  Fixture f;
  auto before = f.model.models();
  auto r = f.model.AdversarialStep(f.src, Range(0, 16), f.tgt, Range(0, 16),
                                   0.0, 0.1);
  EXPECT_TRUE(std::isfinite(r.loss));
  const auto& after = f.model.models();
  bool disc_moved = false;
  for (int i = 0; i < after.size(); ++i) {
    EXPECT_EQ(after.group(i).extractor, before.group(i).extractor);
    EXPECT_EQ(after.group(i).aggregator, before.group(i).aggregator);
    disc_moved |= !(after.group(i).discriminator == before.group(i).discriminator);
  }
  EXPECT_TRUE(disc_moved);
  EXPECT_NE(r.group_accuracy.size(), 0u);
}

TEST(Adversarial, PositiveLambdaMovesExtractors) {
  Fixture f;
  auto before = f.model.models();
  f.model.AdversarialStep(f.src, Range(0, 16), f.tgt, Range(0, 16), 0.5, 0.1);
  EXPECT_FALSE(f.model.models().group(0).extractor == before.group(0).extractor);
}

TEST(Adversarial, DiscriminatorStepLowersLoss) {
  Fixture f;
  const auto& enc = f.model.encoder();
  auto s = enc.Assemble(f.src, Range(0, 32));
  auto t = enc.Assemble(f.tgt, Range(0, 32));
  GroupModels models = f.model.models();
  const double before = EvaluateDomainLoss(models, s, t).loss;
  DomainAdvStep(models, s, t, 0.0, 0.01);
  EXPECT_LT(EvaluateDomainLoss(models, s, t).loss, before);
}

TEST(HighOrder, MatchesComposedForwards) {
  Fixture f;
  auto rows = Range(3, 11);
  auto pass = f.model.Forward(f.src, rows);
  auto mu = f.model.HighOrder(f.src, rows);
  ASSERT_EQ(mu.rows(), 8);
  ASSERT_EQ(mu.cols(), f.model.g());
  EXPECT_EQ(pass.mu, mu);
  auto batch = f.model.encoder().Assemble(f.src, rows);
  for (int i = 0; i < f.model.g(); ++i) {
    const auto& m = f.model.models().group(i);
    nn::Matrix manual = m.aggregator.Forward(m.extractor.Forward(batch.inputs[i]));
    EXPECT_TRUE(mu.col(i).isApprox(manual.col(0), 1e-14));
  }
}

TEST(HighOrder, ZeroAggregatorYieldsBias) {
  Fixture f;
  for (int i = 0; i < f.model.g(); ++i) {
    auto& layer = f.model.mutable_models().mutable_group(i).aggregator.mutable_layers()[0];
    layer.weight.setZero();
    layer.bias(0) = 0.25 * i;
  }
  auto mu = f.model.HighOrder(f.src, Range(0, 5));
  for (int i = 0; i < f.model.g(); ++i) {
    for (int r = 0; r < 5; ++r) EXPECT_DOUBLE_EQ(mu(r, i), 0.25 * i);
  }
}

TEST(HighOrder, FrozenExtractorsOnlyMoveAggregators) {
  Fixture f;
  f.model.set_freeze_extractors(true);
  auto before = f.model.models();
  auto pass = f.model.Forward(f.src, Range(0, 4));
  f.model.Backprop(pass, nn::Matrix::Ones(4, f.model.g()) * 0.1, 0.1);
  for (int i = 0; i < f.model.g(); ++i) {
    EXPECT_EQ(f.model.models().group(i).extractor, before.group(i).extractor);
    EXPECT_FALSE(f.model.models().group(i).aggregator == before.group(i).aggregator);
  }
  EXPECT_THROW(f.model.Backprop(pass, nn::Matrix::Ones(3, f.model.g()), 0.1),
               DimensionError);
}

TEST(HighOrder, BackpropMatchesNumericGradient) {
  Fixture f;
  auto rows = Range(0, 6);
  // Loss = sum(c .* mu) with fixed c; d/dmu = c.
  nn::Matrix c = nn::Matrix::Random(6, f.model.g());
  auto loss = [&](const PassiveModel& m) {
    return (m.HighOrder(f.src, rows).array() * c.array()).sum();
  };
  const double h = 1e-6;
  PassiveModel plus = f.model, minus = f.model;
  plus.mutable_models().mutable_group(1).extractor.mutable_layers()[0].weight(0, 0) += h;
  minus.mutable_models().mutable_group(1).extractor.mutable_layers()[0].weight(0, 0) -= h;
  const double num = (loss(plus) - loss(minus)) / (2 * h);
  const double w0 = f.model.models().group(1).extractor.layers()[0].weight(0, 0);
  auto pass = f.model.Forward(f.src, rows);
  const double eta = 1e-3;
  f.model.Backprop(pass, c, eta);
  const double w1 = f.model.models().group(1).extractor.layers()[0].weight(0, 0);
  EXPECT_NEAR((w0 - w1) / eta, num, 1e-6);
}

double TrainedDomainAccuracy(double shift) {
  auto e = testing::SmokeExperiment(21, shift);
  auto model = testing::MakeModel(e);
  auto src = data::MakePartyView(e.data, e.split.source, PartyRole::kPassive, false);
  auto tgt = data::MakePartyView(e.data, e.split.TargetAll(), PartyRole::kPassive, false);
  for (int epoch = 0; epoch < 30; ++epoch) {
    for (std::size_t b = 0; b + 10 <= 100; b += 10) {
      model.AdversarialStep(src, Range(b, b + 10), tgt, Range(b, b + 10), 0.0, 0.05);
    }
  }
  // Held-out rows on both sides.
  auto test_src = model.encoder().Assemble(src, Range(100, 200));
  auto test_view = data::MakePartyView(e.data, e.split.target_test,
                                       PartyRole::kPassive, false);
  auto test_tgt = model.encoder().Assemble(test_view, Range(0, 100));
  auto r = EvaluateDomainLoss(model.models(), test_src, test_tgt);
  return std::accumulate(r.group_accuracy.begin(), r.group_accuracy.end(), 0.0) /
         r.group_accuracy.size();
}

TEST(Adversarial, DomainsIndistinguishableWithoutShift) {
  const double acc = TrainedDomainAccuracy(0.0);
  EXPECT_GT(acc, 0.4);
  EXPECT_LT(acc, 0.6);
  EXPECT_GT(TrainedDomainAccuracy(3.0), 0.8);
}

TEST(Checkpoint, PassiveModelRoundTrip) {
  Fixture f;
  f.model.AdversarialStep(f.src, Range(0, 16), f.tgt, Range(0, 16), 0.1, 0.1);
  PassiveModel fresh = testing::MakeModel(f.e);
  EXPECT_FALSE(fresh == f.model);
  fresh.LoadJson(nlohmann::json::parse(f.model.ToJson().dump()));
  EXPECT_TRUE(fresh == f.model);
  EXPECT_EQ(fresh.HighOrder(f.src, Range(0, 4)), f.model.HighOrder(f.src, Range(0, 4)));
}

TEST(Architecture, DefaultsAndOverrides) {
  EXPECT_EQ(DefaultExtractorDims(28), (std::vector<int>{28, 56, 28, 14}));
  EXPECT_EQ(DefaultExtractorDims(3), (std::vector<int>{3, 6, 3, 2}));
  ArchitectureConfig arch;
  arch.extractors["group0"] = "FC(3->5)-FC(5->4)";
  arch.discriminator_hidden = {7, 3};
  GroupModels m({"group0", "group1"}, {3, 3}, arch, {});
  EXPECT_EQ(m.group(0).extractor.out_dim(), 4);
  EXPECT_EQ(m.group(0).discriminator.layers().size(), 3u);
  EXPECT_EQ(m.group(0).discriminator.layers()[0].out_dim(), 7);
  EXPECT_EQ(m.group(1).extractor.out_dim(), 2);
  EXPECT_EQ(m.group(1).aggregator.out_dim(), 1);
  auto rt = ArchitectureConfig::FromJson(arch.ToJson());
  EXPECT_EQ(rt.extractors, arch.extractors);
  EXPECT_EQ(rt.discriminator_hidden, arch.discriminator_hidden);
  arch.extractors["group1"] = "FC(4->2)";
  EXPECT_THROW(GroupModels({"group0", "group1"}, {3, 3}, arch, {}), ConfigError);
}

}  // namespace
}  // namespace vflda::adversarial
