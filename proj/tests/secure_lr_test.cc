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
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vflda/errors.h"
#include "vflda/secure_lr.h"

namespace vflda::secure_lr {
namespace {

using protocol::MessageKind;
using protocol::PartyId;

constexpr int kG = 3;
constexpr int kM = 2;

// Plaintext replay of one mean-gradient step; returns delta^C.
struct PlainLR {
  LRWeights w;

  std::vector<double> Logits(const Matrix& mu, const Matrix& x) const {
    Vector z = mu * w.w_c + x * w.w_p;
    z.array() += w.b;
    return {z.data(), z.data() + z.size()};
  }

  Matrix Step(const Matrix& mu, const Matrix& x, const std::vector<int>& y,
              double eta) {
    const auto z = Logits(mu, x);
    Vector d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = nn::Sigmoid(z[i]) - y[i];
    const double n = static_cast<double>(z.size());
    w.w_c -= eta * mu.transpose() * d / n;
    w.w_p -= eta * x.transpose() * d / n;
    w.b -= eta * d.mean();
    return d * w.w_c.transpose();
  }
};

struct Harness {
  explicit Harness(const LRWeights& w, std::uint64_t seed = 1,
                   protocol::SchedulerKind sched = protocol::SchedulerKind::kSequential)
      : bus(true),
        active(PartyId::kB, testing::TestKeys().public_key,
               MakeSplitState(w, cfg), seed * 3 + 1, cfg),
        passive(testing::TestKeys(), kG, seed * 3 + 2, seed * 3 + 3, cfg),
        ch{&active, &passive, &bus, sched} {
    passive.Connect(PartyId::kB);
  }

  MaskConfig cfg;
  protocol::MessageBus bus;
  ActiveParty active;
  PassiveParty passive;
  Channel ch;
  std::int64_t round = 0;

  ForwardResult Forward(const Matrix& mu, const Matrix& x,
                        const std::vector<int>& y) {
    return SecureForward(ch, round++, mu, x, y);
  }
  Matrix Train(const Matrix& mu, const Matrix& x, const std::vector<int>& y,
               double eta) {
    Forward(mu, x, y);
    return SecureBackward(ch, eta);
  }
  Vector WeightsC() const { return Reconstruct(active.state(), passive.noise()); }
};

struct Batch {
  Matrix mu, x;
  std::vector<int> y;
};

Batch RandomBatch(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  Batch b{Matrix(n, kG), Matrix(n, kM), {}};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kG; ++j) b.mu(i, j) = normal(rng);
    for (int j = 0; j < kM; ++j) b.x(i, j) = normal(rng);
    b.y.push_back(normal(rng) > 0 ? 1 : 0);
  }
  return b;
}

TEST(SecureLR, FirstRoundLogitNeedsNoCorrection) {
  auto w = InitLRWeights(kG, kM, 5);
  Harness h(w);
  std::mt19937_64 rng(1);
  auto b = RandomBatch(rng, 6);
  auto r = h.Forward(b.mu, b.x, b.y);
  PlainLR plain{w};
  auto expect = plain.Logits(b.mu, b.x);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(r.logits[i], expect[i], 1e-9);
  EXPECT_EQ(h.passive.noise().t, 0);
  for (const auto& e : h.passive.noise().eps) EXPECT_EQ(e.mantissa, 0);
}

TEST(SecureLR, ZeroMuGivesLocalLogitAfterMaskedRounds) {
  auto w = InitLRWeights(kG, kM, 6);
  Harness h(w);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 3; ++t) {
    auto b = RandomBatch(rng, 4);
    h.Train(b.mu, b.x, b.y, 0.1);
  }
  auto b = RandomBatch(rng, 4);
  b.mu.setZero();
  auto r = h.Forward(b.mu, b.x, b.y);
  const auto& s = h.active.state();
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(r.logits[i], b.x.row(i).dot(s.w_p) + s.b, 1e-12);
  }
}

TEST(SecureLR, ZeroFeatureGradientIsPureMaskDrift) {
  auto w = InitLRWeights(kG, kM, 7);
  Harness h(w);
  Matrix mu = Matrix::Zero(5, kG);
  Matrix x = Matrix::Zero(5, kM);
  std::vector<int> y = {1, 0, 1, 1, 0};
  const auto before = h.active.state();
  auto delta_c = h.Train(mu, x, y, 0.1);
  const auto& after = h.active.state();
  const auto& eps = h.passive.noise().eps;
  EXPECT_EQ(after.w_p, before.w_p);
  EXPECT_EQ(after.t, 1);
  EXPECT_EQ(h.passive.noise().t, 1);
  for (int i = 0; i < kG; ++i) {
    EXPECT_FALSE(after.w_tilde_c[i] == before.w_tilde_c[i]);
    EXPECT_TRUE(after.w_tilde_c[i] + eps[i] == before.w_tilde_c[i]) << i;
  }
  // W^C did not move, so delta^C = delta * W^C_0.
  const double p = nn::Sigmoid(w.b);
  for (int r = 0; r < 5; ++r) {
    for (int i = 0; i < kG; ++i) {
      EXPECT_NEAR(delta_c(r, i), (p - y[r]) * w.w_c[i], 1e-9);
    }
  }
}

TEST(SecureLR, OneIterationMatchesOracle) {
  auto w = InitLRWeights(kG, kM, 8);
  Harness h(w);
  PlainLR plain{w};
  std::mt19937_64 rng(3);
  auto b = RandomBatch(rng, 8);
  auto delta_c = h.Train(b.mu, b.x, b.y, 0.2);
  auto expect_delta = plain.Step(b.mu, b.x, b.y, 0.2);
  const Vector wc = h.WeightsC();
  for (int i = 0; i < kG; ++i) {
    EXPECT_NEAR(wc[i], plain.w.w_c[i], 1e-10);
    // p's copy is masked.
    EXPECT_GT(std::abs(h.active.state().w_tilde_c[i].Decode() - plain.w.w_c[i]), 1e-3);
  }
  EXPECT_TRUE(h.active.state().w_p.isApprox(plain.w.w_p, 1e-12));
  EXPECT_NEAR(h.active.state().b, plain.w.b, 1e-12);
  EXPECT_LT((delta_c - expect_delta).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SecureLR, TrajectoryAndPredictionsTrackOracle) {
  auto w = InitLRWeights(kG, kM, 9);
  Harness h(w);
  PlainLR plain{w};
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    auto b = RandomBatch(rng, 5);
    auto r = h.Forward(b.mu, b.x, b.y);
    auto expect_logits = plain.Logits(b.mu, b.x);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(r.logits[i], expect_logits[i], 1e-6);
    auto dc = SecureBackward(h.ch, 0.1);
    auto edc = plain.Step(b.mu, b.x, b.y, 0.1);
    EXPECT_LT((dc - edc).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_LT((h.WeightsC() - plain.w.w_c).cwiseAbs().maxCoeff(), 1e-9);
  auto b = RandomBatch(rng, 7);
  auto p = SecurePredict(h.ch, h.round++, b.mu, b.x);
  auto z = plain.Logits(b.mu, b.x);
  ASSERT_EQ(p.size(), 7u);
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(p[i], nn::Sigmoid(z[i]), 1e-6);
  // Predicting does not advance the counters.
  EXPECT_EQ(h.active.state().t, 10);
  EXPECT_EQ(h.passive.noise().t, 10);
}

TEST(SecureLR, PredictionMonotoneInPositiveWeightFeature) {
  auto w = InitLRWeights(kG, kM, 10);
  w.w_c << 0.5, -0.3, 0.2;
  Harness h(w);
  std::mt19937_64 rng(5);
  auto b = RandomBatch(rng, 1);
  auto base = SecurePredict(h.ch, 0, b.mu, b.x);
  b.mu(0, 0) += 0.5;
  auto up = SecurePredict(h.ch, 1, b.mu, b.x);
  b.mu(0, 1) += 0.5;
  auto down = SecurePredict(h.ch, 2, b.mu, b.x);
  EXPECT_GT(up[0], base[0]);
  EXPECT_LT(down[0], up[0]);
}

TEST(SecureLR, EmptyBatchPredictsNothing) {
  Harness h(InitLRWeights(kG, kM, 11));
  EXPECT_TRUE(SecurePredict(h.ch, 0, Matrix(0, kG), Matrix(0, kM)).empty());
  EXPECT_EQ(h.bus.size(), 0u);
}

TEST(SecureLR, ForeignKeyIsRejected) {
  auto w = InitLRWeights(kG, kM, 12);
  MaskConfig cfg;
  auto other = phe::GenerateKeypair(512, 99);
  ActiveParty active(PartyId::kA, other.public_key, MakeSplitState(w, cfg), 1, cfg);
  PassiveParty passive(testing::TestKeys(), kG, 2, 3, cfg);
  passive.Connect(PartyId::kA);
  protocol::MessageBus bus;
  Channel ch{&active, &passive, &bus};
  std::mt19937_64 rng(6);
  auto b = RandomBatch(rng, 2);
  try {
    SecureForward(ch, 0, b.mu, b.x, b.y);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("different key"), std::string::npos);
  }
}

TEST(SecureLR, StaleNoiseCounterIsDetected) {
  Harness h(InitLRWeights(kG, kM, 13));
  std::mt19937_64 rng(7);
  auto b = RandomBatch(rng, 3);
  h.Train(b.mu, b.x, b.y, 0.1);
  h.passive.mutable_noise().t -= 1;  // C replays an old eps^C
  try {
    h.Forward(b.mu, b.x, b.y);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration desync"), std::string::npos)
        << e.what();
  }
}

TEST(SecureLR, MisalignedBatchIsAProtocolFault) {
  Harness h(InitLRWeights(kG, kM, 14));
  std::mt19937_64 rng(8);
  auto b = RandomBatch(rng, 4);
  EXPECT_THROW(SecureForward(h.ch, 0, b.mu.topRows(3), b.x, b.y), ProtocolError);
  // Same fault injected below the convenience wrapper: C encrypts 3 rows,
  // p holds 4.
  h.active.BeginForward(1, b.x, b.y);
  auto first = h.passive.BeginForward(1, b.mu.topRows(3), true);
  try {
    protocol::RunPhase(protocol::SchedulerKind::kSequential, h.passive,
                       h.active, h.bus, std::move(first));
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("batch misalignment"), std::string::npos)
        << e.what();
  }
}

TEST(SecureLR, BackwardWithoutForwardFails) {
  Harness h(InitLRWeights(kG, kM, 15));
  EXPECT_THROW(SecureBackward(h.ch, 0.1), ProtocolError);
}

TEST(SecureLR, MuIsDroppedOnceTheRoundEnds) {
  Harness h(InitLRWeights(kG, kM, 16));
  std::mt19937_64 rng(9);
  auto b = RandomBatch(rng, 3);
  h.Forward(b.mu, b.x, b.y);
  EXPECT_EQ(h.passive.retained_batches(), 1u);
  SecureBackward(h.ch, 0.1);
  EXPECT_EQ(h.passive.retained_batches(), 0u);
  SecurePredict(h.ch, h.round++, b.mu, b.x);
  EXPECT_EQ(h.passive.retained_batches(), 0u);
}

TEST(SecureLR, MasksAreFreshAndNeverLogged) {
  Harness h(InitLRWeights(kG, kM, 17));
  std::vector<phe::FixedPoint> masks;
  h.active.set_mask_observer([&](const phe::FixedPoint& m) { masks.push_back(m); });
  std::mt19937_64 rng(10);
  for (int t = 0; t < 4; ++t) {
    auto b = RandomBatch(rng, 4);
    h.Train(b.mu, b.x, b.y, 0.1);
  }
  ASSERT_EQ(masks.size(), 4u * (4 + kG));
  std::set<std::string> seen;
  for (const auto& m : masks) EXPECT_TRUE(seen.insert(m.mantissa.get_str()).second);

  for (const auto& msg : h.bus.trace()) {
    for (const auto& pt : msg.plaintexts) {
      EXPECT_FALSE(seen.count(pt.mantissa.get_str()));
    }
  }
  std::string transcript;
  for (const auto& env : h.bus.envelopes()) transcript += env.dump();
  for (const auto& m : masks) {
    EXPECT_EQ(transcript.find(m.mantissa.get_str()), std::string::npos);
  }
  for (const auto& wt : h.active.state().w_tilde_c) {
    EXPECT_FALSE(seen.count(wt.mantissa.get_str()));
  }
}

TEST(SecureLR, EachPartySeesOnlyItsShare) {
  Harness h(InitLRWeights(kG, kM, 18));
  std::mt19937_64 rng(11);
  auto b = RandomBatch(rng, 3);
  h.Train(b.mu, b.x, b.y, 0.1);
  SecurePredict(h.ch, h.round++, b.mu, b.x);
  const auto& n = testing::TestKeys().public_key->n;
  int to_p_plain = 0;
  for (const auto& m : h.bus.trace()) {
    for (const auto& c : m.ciphertexts) EXPECT_EQ(c.key->n, n);
    if (m.receiver == PartyId::kC) {
      EXPECT_TRUE(m.plaintexts.empty()) << protocol::KindName(m.kind);
    } else {
      EXPECT_TRUE(m.kind == MessageKind::kLogitPlusMask ||
                  m.kind == MessageKind::kMaskedGradTilde ||
                  m.plaintexts.empty());
      to_p_plain += !m.plaintexts.empty();
    }
  }
  EXPECT_EQ(to_p_plain, 3);  // two logit legs and one gradient leg
}

TEST(SecureLR, ThreadedSchedulerMatchesSequential) {
  auto w = InitLRWeights(kG, kM, 19);
  Harness seq(w, 4), thr(w, 4, protocol::SchedulerKind::kThreaded);
  std::mt19937_64 r1(12), r2(12);
  for (int t = 0; t < 3; ++t) {
    auto b1 = RandomBatch(r1, 4), b2 = RandomBatch(r2, 4);
    auto d1 = seq.Train(b1.mu, b1.x, b1.y, 0.1);
    auto d2 = thr.Train(b2.mu, b2.x, b2.y, 0.1);
    EXPECT_EQ(d1, d2);
  }
  EXPECT_EQ(seq.active.state().w_tilde_c, thr.active.state().w_tilde_c);
  EXPECT_EQ(seq.passive.noise().eps, thr.passive.noise().eps);
}

TEST(NoiseSampler, BoundedAndSeeded) {
  MaskConfig cfg;
  NoiseSampler a(5, cfg), b(5, cfg);
  const mpz_class bound = mpz_class(1) << 64;
  bool negative = false;
  for (int i = 0; i < 200; ++i) {
    auto x = a.Next();
    EXPECT_TRUE(x == b.Next());
    EXPECT_EQ(x.exponent, cfg.frac_bits);
    EXPECT_LE(abs(x.mantissa), bound);
    negative |= x.mantissa < 0;
  }
  EXPECT_TRUE(negative);
}

TEST(SplitState, ReconstructStartsAtInitialWeights) {
  auto w = InitLRWeights(4, 2, 3);
  for (int i = 0; i < 4; ++i) {
    EXPECT_GE(w.w_c[i], -0.1);
    EXPECT_LT(w.w_c[i], 0.1);
  }
  EXPECT_EQ(w.b, 0.0);
  MaskConfig cfg;
  auto s = MakeSplitState(w, cfg);
  auto n = MakeNoiseState(4, cfg);
  EXPECT_LT((Reconstruct(s, n) - w.w_c).cwiseAbs().maxCoeff(), 1e-20);
  n.eps.pop_back();
  EXPECT_THROW(Reconstruct(s, n), DimensionError);
}

}  // namespace
}  // namespace vflda::secure_lr
