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
#include <type_traits>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vflda/errors.h"
#include "vflda/oracle.h"

namespace vflda::oracle {
namespace {

static_assert(std::is_base_of_v<protocol::LabelExchange, PlainExchange>);
static_assert(std::is_base_of_v<protocol::LabelExchange, protocol::SecureExchange>);

TEST(Verify, SmokeRunTracksOracle) {
  auto e = testing::SmokeExperiment();
  auto r = VerifyProtocol(e.run, e.data, e.split, e.spec, e.arch,
                          testing::TestKeys(), 30);
  EXPECT_TRUE(r.report.pass) << r.report.Summary();
  EXPECT_EQ(r.report.iterations, 30);
  EXPECT_LT(r.report.max_weight_divergence, 1e-6);
  EXPECT_LT(r.report.max_logit_divergence, 1e-6);
  EXPECT_GT(r.report.max_weight_divergence, 0.0);  // fixed point is not free
  ASSERT_EQ(r.secure.iterations.size(), 30u);
  EXPECT_EQ(r.secure.iterations[29].w_c.size(), 3);
}

TEST(Oracle, SecureBtoAMatchesPlainBtoA) {
  auto e = testing::SmokeExperiment();
  e.run.epochs_pretrain = 1;
  e.run.epochs_finetune = 2;
  auto plain = OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kBtoA);

  auto shards = protocol::Shards::Build(e.data, e.split);
  auto model = testing::MakeModel(e);
  protocol::SecureExchange ex(testing::TestKeys(), model.g(), e.run);
  protocol::Pretrain(e.run, e.data, &model, ex, shards.source_p, shards.source_c,
                     shards.target_all_c);
  protocol::Finetune(e.run, e.data, &model, ex, shards.target_p, shards.target_c);
  auto ev = protocol::Evaluate(e.run, e.data, &model, ex, shards.test_p, shards.test_c);

  const auto w = ex.Weights();
  EXPECT_LT((w.w_c - plain.weights.w_c).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((w.w_p - plain.weights.w_p).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(w.b, plain.weights.b, 1e-6);
  ASSERT_EQ(ev.predictions.size(), plain.evaluation.predictions.size());
  for (std::size_t i = 0; i < ev.predictions.size(); ++i) {
    EXPECT_NEAR(ev.predictions[i], plain.evaluation.predictions[i], 1e-6);
  }
  EXPECT_NEAR(ev.auc, plain.evaluation.auc, 1e-3);
}

TEST(Oracle, ZeroLambdaReducesToSourceOnlyPretrain) {
  auto e = testing::SmokeExperiment();
  e.run.lambda = 0.0;
  auto with = OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kBtoA);
  e.run.domain_adaptation = false;
  auto without = OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kBtoA);
  EXPECT_EQ(with.weights.w_c, without.weights.w_c);
  EXPECT_EQ(with.weights.w_p, without.weights.w_p);
  EXPECT_EQ(with.evaluation.predictions, without.evaluation.predictions);
  for (int g = 0; g < with.c_model->g(); ++g) {
    EXPECT_EQ(with.c_model->models().group(g).extractor,
              without.c_model->models().group(g).extractor);
  }
}

TEST(Oracle, SettingsUseTheirOwnRows) {
  auto e = testing::SmokeExperiment();
  auto local = OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kALocal);
  EXPECT_FALSE(local.c_model.has_value());
  EXPECT_EQ(local.weights.w_c.size(), 0);
  EXPECT_EQ(local.history.iterations.size(), 3u * 3u);  // 40 rows / 16
  auto avfl = OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kAVFL);
  EXPECT_EQ(avfl.weights.w_c.size(), 3);
  auto ab = OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kABVFL);
  EXPECT_EQ(ab.history.iterations.size(), 3u * 15u);  // 240 rows / 16
  EXPECT_FALSE(ab.history.iterations[0].loss_adv.has_value());
  auto bta = OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kBtoA);
  EXPECT_EQ(bta.history.iterations.size(), 3u * 13u + 3u * 3u);
  EXPECT_EQ(ParseSetting("B->A"), Setting::kBtoA);
  EXPECT_EQ(SettingName(ParseSetting("A-Local")), "ALocal");
  EXPECT_THROW(ParseSetting("C-only"), ConfigError);
}

TEST(Oracle, NoiseColumnsAtCAddNothing) {
  double local = 0, vfl = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    nlohmann::json cfg = testing::SmokeConfig(100 + seed, 0.0);
    auto& s = cfg["data"]["synth"];
    s["group_strength"] = 0.0;
    s["interaction_strength"] = 0.0;
    s["active_strength"] = 2.0;
    s["target_labeled_size"] = 400;
    s["target_test_size"] = 1000;
    s["source_size"] = 400;
    auto e = experiment::FromJson(cfg, "<noise>");
    e.run.seed = seed;
    e.run.epochs_finetune = 10;
    e.run.eta_finetune = 0.05;
    local += OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kALocal)
                 .evaluation.auc;
    vfl += OracleTrain(e.run, e.data, e.split, e.spec, e.arch, Setting::kAVFL)
               .evaluation.auc;
  }
  EXPECT_NEAR(local / 5, vfl / 5, 0.02);
}

protocol::History Trajectory(int n, double scale) {
  protocol::History h;
  for (int t = 0; t < n; ++t) {
    protocol::IterationRecord r;
    r.iteration = t;
    r.w_c = Vector::Constant(2, scale * t);
    r.w_p = Vector::Constant(1, -scale * t);
    r.b = 0.5 * scale;
    r.logits = {scale, 2 * scale};
    h.iterations.push_back(r);
  }
  return h;
}

TEST(Compare, IdenticalHistoriesHaveZeroDivergence) {
  auto h = Trajectory(10, 0.1);
  auto r = CompareTrajectories(h, h, 40);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_weight_divergence, 0.0);
  EXPECT_EQ(r.max_logit_divergence, 0.0);
  EXPECT_EQ(r.divergence.size(), 10u);
  EXPECT_FALSE(r.first_failure.has_value());
  EXPECT_NE(r.Summary().find("PASS"), std::string::npos);
}

TEST(Compare, PerturbationIsLocated) {
  auto a = Trajectory(10, 0.1);
  auto b = a;
  b.iterations[6].w_c[1] += 1e-4;
  auto r = CompareTrajectories(a, b, 40);
  EXPECT_FALSE(r.pass);
  ASSERT_TRUE(r.first_failure.has_value());
  EXPECT_EQ(*r.first_failure, 6);
  EXPECT_NEAR(r.max_weight_divergence, 1e-4, 1e-12);
  EXPECT_EQ(r.ToJson()["first_failure"], 6);

  auto c = a;
  c.iterations[2].logits[0] += 1e-3;
  EXPECT_EQ(*CompareTrajectories(a, c, 40).first_failure, 2);
  // Below tolerance: passes.
  auto d = a;
  d.iterations[9].b += 0.5 * Tolerance(10, 40);
  EXPECT_TRUE(CompareTrajectories(a, d, 40).pass);
}

TEST(Compare, LengthMismatchIsAnError) {
  EXPECT_THROW(CompareTrajectories(Trajectory(4, 1), Trajectory(5, 1), 40),
               DimensionError);
}

TEST(Compare, ToleranceIsLinearInT) {
  EXPECT_DOUBLE_EQ(Tolerance(1, 40), kToleranceConstant * std::ldexp(1.0, -40));
  EXPECT_DOUBLE_EQ(Tolerance(200, 40), 200 * Tolerance(1, 40));
  EXPECT_LT(Tolerance(50, 40), 1e-6);
  EXPECT_LT(Tolerance(200, 40), 1e-5);
}

TEST(PlainExchange, MatchesHandComputedStep) {
  PlainExchange ex;
  secure_lr::LRWeights w;
  w.w_c = Vector::Constant(1, 0.5);
  w.w_p = Vector::Constant(1, -1.0);
  w.b = 0.0;
  ex.Connect(protocol::PartyId::kB, w);
  Matrix mu(1, 1), x(1, 1);
  mu << 2.0;
  x << 1.0;
  // z = 1 - 1 = 0, p = 0.5, delta = -0.5 for y = 1.
  auto step = ex.TrainStep(mu, x, {1}, 0.1);
  EXPECT_DOUBLE_EQ(step.logits[0], 0.0);
  EXPECT_NEAR(step.loss, std::log(2.0), 1e-15);
  const auto after = ex.Weights();
  EXPECT_DOUBLE_EQ(after.w_c[0], 0.5 + 0.1 * 0.5 * 2.0);
  EXPECT_DOUBLE_EQ(after.w_p[0], -1.0 + 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(after.b, 0.05);
  EXPECT_DOUBLE_EQ(step.delta_c(0, 0), -0.5 * after.w_c[0]);
  EXPECT_EQ(ex.iteration(), 1);
  EXPECT_THROW(ex.TrainStep(mu, Matrix(2, 1), {1}, 0.1), DimensionError);
}

}  // namespace
}  // namespace vflda::oracle
