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

// Secure split logistic regression between an active party p, which owns
// the labels and x^p, and the passive party C, which owns the private key
// and the high-order features mu. p only ever holds the masked weights
// W~^C = W^C - eps^C; C holds the accumulated mask eps^C.

#ifndef VFLDA_SECURE_LR_H_
#define VFLDA_SECURE_LR_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "json.hpp"
#include "vflda/message.h"
#include "vflda/nn.h"
#include "vflda/phe.h"

namespace vflda::secure_lr {

using nn::Matrix;
using nn::Vector;
using protocol::PartyId;
using protocol::PartyMessage;

struct MaskConfig {
  int frac_bits = phe::kDefaultFracBits;
  // Masks are uniform over +-2^noise_bits quanta of the 2^-frac_bits grid.
  int noise_bits = 64;
};

// Plaintext LR parameters z = mu W^C + x^p W^p + b.
struct LRWeights {
  Vector w_c;
  Vector w_p;
  double b = 0.0;
};

// Uniform(-0.1, 0.1) weights and zero bias from a dedicated stream.
LRWeights InitLRWeights(int g, int m, std::uint64_t seed);

// Parameters as seen by p.
struct SplitLRState {
  std::vector<phe::FixedPoint> w_tilde_c;  // exponent 2 * frac_bits
  Vector w_p;
  double b = 0.0;
  std::int64_t t = 0;
};

// Mask accumulator held by C.
struct NoiseState {
  std::vector<phe::FixedPoint> eps;  // exponent 2 * frac_bits
  std::int64_t t = 0;
};

// eps^C_0 = 0, so W~^C_0 = W^C_0 (rounded onto the 2f grid).
SplitLRState MakeSplitState(const LRWeights& w, const MaskConfig& cfg);
NoiseState MakeNoiseState(int g, const MaskConfig& cfg);

// Checkpoint encoding; mantissas are decimal strings.
nlohmann::json SplitStateToJson(const SplitLRState& s);
SplitLRState SplitStateFromJson(const nlohmann::json& j);
nlohmann::json NoiseStateToJson(const NoiseState& s);
NoiseState NoiseStateFromJson(const nlohmann::json& j);

// W^C recombined from both parties; test harness use only.
Vector Reconstruct(const SplitLRState& p, const NoiseState& c);

class NoiseSampler {
 public:
  NoiseSampler(std::uint64_t seed, const MaskConfig& cfg);
  phe::FixedPoint Next();

 private:
  std::mt19937_64 rng_;
  MaskConfig cfg_;
};

struct ForwardResult {
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<double> delta;  // p_hat - y per sample; empty when predicting
  double loss = 0.0;          // batch mean, 0 when predicting
};

// Party p (A or B). Holds only the public key.
class ActiveParty : public protocol::Endpoint {
 public:
  ActiveParty(PartyId id, std::shared_ptr<const phe::PublicKey> key,
              SplitLRState state, std::uint64_t noise_seed,
              const MaskConfig& cfg);

  PartyId id() const override { return id_; }
  std::vector<PartyMessage> Handle(const PartyMessage& m) override;
  bool PhaseDone() const override { return phase_ == Phase::kIdle; }

  // Arms the forward leg; empty labels means prediction only.
  void BeginForward(std::int64_t round_id, Matrix x_p, std::vector<int> labels);
  // Starts the backward leg of the current round.
  std::vector<PartyMessage> BeginBackward(double eta);

  const ForwardResult& forward_result() const { return forward_; }
  const SplitLRState& state() const { return state_; }
  SplitLRState& mutable_state() { return state_; }
  const phe::PublicKey& public_key() const { return *key_; }

  // Sees every mask p draws; used to check masks are fresh.
  void set_mask_observer(std::function<void(const phe::FixedPoint&)> f) {
    observer_ = std::move(f);
  }

 private:
  enum class Phase { kIdle, kAwaitMu, kAwaitLogit, kAwaitGradTilde,
                     kAwaitAccumNoise };

  void Expect(const PartyMessage& m, protocol::MessageKind kind, int rows,
              int cols) const;
  phe::FixedPoint Mask();
  PartyMessage Reply(protocol::MessageKind kind, int rows, int cols) const;

  PartyId id_;
  std::shared_ptr<const phe::PublicKey> key_;
  SplitLRState state_;
  NoiseSampler sampler_;
  MaskConfig cfg_;
  std::function<void(const phe::FixedPoint&)> observer_;

  Phase phase_ = Phase::kIdle;
  std::int64_t round_id_ = -1;
  Matrix x_p_;
  std::vector<int> labels_;
  std::vector<phe::Ciphertext> enc_mu_;  // batch x g, row-major
  std::vector<phe::FixedPoint> masks_;   // current leg's eps^p
  std::vector<phe::FixedPoint> grad_tilde_;
  Vector grad_p_;
  double grad_b_ = 0.0;
  double eta_ = 0.0;
  ForwardResult forward_;
};

// Party C's side of the label exchange. Holds the key pair.
class PassiveParty : public protocol::Endpoint {
 public:
  PassiveParty(phe::Keypair keys, int g, std::uint64_t encrypt_seed,
               std::uint64_t noise_seed, const MaskConfig& cfg);

  PartyId id() const override { return PartyId::kC; }
  std::vector<PartyMessage> Handle(const PartyMessage& m) override;
  bool PhaseDone() const override { return phase_ == Phase::kIdle; }

  // Talks to a new active party with a fresh eps^C_0 = 0.
  void Connect(PartyId peer);
  PartyId peer() const { return peer_; }

  std::vector<PartyMessage> BeginForward(std::int64_t round_id,
                                         const Matrix& mu, bool training);
  void BeginBackward(double eta);

  // Per-sample delta^l * W^C_{t+1}, batch x g.
  const Matrix& delta_c() const { return delta_c_; }
  const NoiseState& noise() const { return noise_; }
  NoiseState& mutable_noise() { return noise_; }
  const phe::Keypair& keys() const { return keys_; }
  std::size_t retained_batches() const { return retained_mu_.size(); }

 private:
  enum class Phase { kIdle, kAwaitLogit, kAwaitGradC, kAwaitDeltaC };

  PartyMessage Reply(protocol::MessageKind kind, int rows, int cols) const;

  phe::Keypair keys_;
  int g_;
  phe::Encryptor encryptor_;
  phe::Decryptor decryptor_;
  NoiseSampler sampler_;
  MaskConfig cfg_;
  PartyId peer_ = PartyId::kB;
  NoiseState noise_;

  Phase phase_ = Phase::kIdle;
  std::int64_t round_id_ = -1;
  bool training_ = false;
  // Quantised mu per round, dropped once the round completes.
  std::map<std::int64_t, std::vector<phe::FixedPoint>> retained_mu_;
  int batch_ = 0;
  phe::FixedPoint eta_q_;
  Matrix delta_c_;
};

// One secure round at a time over a bus.
struct Channel {
  ActiveParty* active;
  PassiveParty* passive;
  protocol::MessageBus* bus;
  protocol::SchedulerKind scheduler = protocol::SchedulerKind::kSequential;
};

ForwardResult SecureForward(Channel& ch, std::int64_t round_id,
                            const Matrix& mu, const Matrix& x_p,
                            const std::vector<int>& labels);
// Runs after SecureForward of the same round; returns delta^C.
Matrix SecureBackward(Channel& ch, double eta);
std::vector<double> SecurePredict(Channel& ch, std::int64_t round_id,
                                  const Matrix& mu, const Matrix& x_p);

}  // namespace vflda::secure_lr

#endif  // VFLDA_SECURE_LR_H_
