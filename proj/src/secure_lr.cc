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

#include "vflda/secure_lr.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vflda/errors.h"

namespace vflda::secure_lr {

using protocol::MessageKind;

LRWeights InitLRWeights(int g, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  LRWeights w;
  w.w_c.resize(g);
  w.w_p.resize(m);
  for (int i = 0; i < g; ++i) w.w_c[i] = u(rng);
  for (int i = 0; i < m; ++i) w.w_p[i] = u(rng);
  w.b = 0.0;
  return w;
}

SplitLRState MakeSplitState(const LRWeights& w, const MaskConfig& cfg) {
  SplitLRState s;
  for (int i = 0; i < w.w_c.size(); ++i) {
    s.w_tilde_c.push_back(phe::FixedPoint::Encode(w.w_c[i], 2 * cfg.frac_bits));
  }
  s.w_p = w.w_p;
  s.b = w.b;
  return s;
}

NoiseState MakeNoiseState(int g, const MaskConfig& cfg) {
  NoiseState n;
  n.eps.assign(g, phe::FixedPoint{0, 2 * cfg.frac_bits});
  return n;
}

namespace {

nlohmann::json FixedToJson(const std::vector<phe::FixedPoint>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& x : v) arr.push_back({x.mantissa.get_str(), x.exponent});
  return arr;
}

std::vector<phe::FixedPoint> FixedFromJson(const nlohmann::json& j) {
  std::vector<phe::FixedPoint> out;
  for (const auto& e : j) {
    phe::FixedPoint x;
    try {
      x.mantissa = mpz_class(e.at(0).get<std::string>(), 10);
    } catch (const std::invalid_argument&) {
      throw ConfigError("checkpoint: malformed fixed-point mantissa");
    }
    x.exponent = e.at(1).get<int>();
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace

nlohmann::json SplitStateToJson(const SplitLRState& s) {
  return {{"w_tilde_c", FixedToJson(s.w_tilde_c)},
          {"w_p", std::vector<double>(s.w_p.data(), s.w_p.data() + s.w_p.size())},
          {"b", s.b},
          {"t", s.t}};
}

SplitLRState SplitStateFromJson(const nlohmann::json& j) {
  SplitLRState s;
  s.w_tilde_c = FixedFromJson(j.at("w_tilde_c"));
  const auto w = j.at("w_p").get<std::vector<double>>();
  s.w_p = Vector::Map(w.data(), static_cast<Eigen::Index>(w.size()));
  s.b = j.at("b").get<double>();
  s.t = j.at("t").get<std::int64_t>();
  return s;
}

nlohmann::json NoiseStateToJson(const NoiseState& s) {
  return {{"eps", FixedToJson(s.eps)}, {"t", s.t}};
}

NoiseState NoiseStateFromJson(const nlohmann::json& j) {
  NoiseState s;
  s.eps = FixedFromJson(j.at("eps"));
  s.t = j.at("t").get<std::int64_t>();
  return s;
}

Vector Reconstruct(const SplitLRState& p, const NoiseState& c) {
  if (p.w_tilde_c.size() != c.eps.size()) {
    throw DimensionError("masked weights and mask differ in length");
  }
  Vector w(p.w_tilde_c.size());
  for (std::size_t i = 0; i < c.eps.size(); ++i) {
    w[i] = (p.w_tilde_c[i] + c.eps[i]).Decode();
  }
  return w;
}

NoiseSampler::NoiseSampler(std::uint64_t seed, const MaskConfig& cfg)
    : rng_(seed), cfg_(cfg) {
  if (cfg.noise_bits < 1 || cfg.noise_bits > 512) {
    throw ConfigError("noise_bits must be in [1, 512]");
  }
}

phe::FixedPoint NoiseSampler::Next() {
  mpz_class m = 0;
  int remaining = cfg_.noise_bits;
  while (remaining > 0) {
    const int take = std::min(remaining, 64);
    std::uint64_t word = rng_();
    if (take < 64) word &= (std::uint64_t{1} << take) - 1;
    mpz_class part;
    mpz_import(part.get_mpz_t(), 1, 1, sizeof(word), 0, 0, &word);
    m = (m << take) | part;
    remaining -= take;
  }
  if (rng_() & 1) m = -m;
  return phe::FixedPoint{m, cfg_.frac_bits};
}

// ---------------------------------------------------------------------------
// Active party.

ActiveParty::ActiveParty(PartyId id, std::shared_ptr<const phe::PublicKey> key,
                         SplitLRState state, std::uint64_t noise_seed,
                         const MaskConfig& cfg)
    : id_(id),
      key_(std::move(key)),
      state_(std::move(state)),
      sampler_(noise_seed, cfg),
      cfg_(cfg) {
  if (id_ == PartyId::kC) throw ConfigError("C cannot be the active party");
  if (state_.w_tilde_c.empty()) throw DimensionError("W~^C is empty");
}

phe::FixedPoint ActiveParty::Mask() {
  phe::FixedPoint m = sampler_.Next();
  if (observer_) observer_(m);
  return m;
}

PartyMessage ActiveParty::Reply(MessageKind kind, int rows, int cols) const {
  PartyMessage m;
  m.round_id = round_id_;
  m.iteration = state_.t;
  m.kind = kind;
  m.sender = id_;
  m.receiver = PartyId::kC;
  m.rows = rows;
  m.cols = cols;
  return m;
}

void ActiveParty::Expect(const PartyMessage& m, MessageKind kind, int rows,
                         int cols) const {
  if (m.kind == MessageKind::kControl &&
      m.control == protocol::ControlCode::kAbort) {
    throw ProtocolError("peer aborted: " + m.detail);
  }
  if (m.kind != kind) {
    throw ProtocolError("party " + std::string(protocol::PartyName(id_)) +
                        " expected " + std::string(protocol::KindName(kind)) +
                        ", got " + std::string(protocol::KindName(m.kind)));
  }
  if (m.sender != PartyId::kC || m.receiver != id_) {
    throw ProtocolError("message misrouted");
  }
  if (m.round_id != round_id_) {
    throw ProtocolError("round id mismatch: got " + std::to_string(m.round_id) +
                        ", expected " + std::to_string(round_id_));
  }
  if (m.iteration != state_.t) {
    throw ProtocolError("iteration desync: C at " + std::to_string(m.iteration) +
                        ", " + std::string(protocol::PartyName(id_)) + " at " +
                        std::to_string(state_.t));
  }
  protocol::ValidateShape(m, rows, cols);
}

void ActiveParty::BeginForward(std::int64_t round_id, Matrix x_p,
                               std::vector<int> labels) {
  if (phase_ != Phase::kIdle) throw ProtocolError("previous round unfinished");
  if (x_p.cols() != state_.w_p.size()) {
    throw DimensionError("x^p has " + std::to_string(x_p.cols()) +
                         " columns, W^p has " +
                         std::to_string(state_.w_p.size()));
  }
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(x_p.rows())) {
    throw DimensionError("labels and x^p differ in batch size");
  }
  round_id_ = round_id;
  x_p_ = std::move(x_p);
  labels_ = std::move(labels);
  forward_ = ForwardResult{};
  enc_mu_.clear();
  masks_.clear();
  phase_ = Phase::kAwaitMu;
}

std::vector<PartyMessage> ActiveParty::Handle(const PartyMessage& m) {
  const int batch = static_cast<int>(x_p_.rows());
  const int g = static_cast<int>(state_.w_tilde_c.size());
  const int f = cfg_.frac_bits;
  switch (phase_) {
    case Phase::kAwaitMu: {
      Expect(m, MessageKind::kEncMu, batch, g);
      for (const auto& c : m.ciphertexts) {
        if (!c.key || c.key->n != key_->n) {
          throw ProtocolError("EncMu encrypted under a different key");
        }
      }
      enc_mu_ = m.ciphertexts;
      PartyMessage out = Reply(MessageKind::kMaskedLogit, batch, 1);
      for (int b = 0; b < batch; ++b) {
        std::span<const phe::Ciphertext> row(enc_mu_.data() + b * g, g);
        phe::FixedPoint eps = Mask();
        out.ciphertexts.push_back(
            phe::AddPt(phe::EncDot(row, state_.w_tilde_c), eps));
        masks_.push_back(std::move(eps));
      }
      phase_ = Phase::kAwaitLogit;
      return {std::move(out)};
    }
    case Phase::kAwaitLogit: {
      Expect(m, MessageKind::kLogitPlusMask, batch, 1);
      forward_.logits.resize(batch);
      forward_.probs.resize(batch);
      const Vector local = x_p_ * state_.w_p;
      for (int b = 0; b < batch; ++b) {
        const double z_c = (m.plaintexts[b] - masks_[b]).Decode();
        const double z = z_c + local[b] + state_.b;
        forward_.logits[b] = z;
        forward_.probs[b] = nn::Sigmoid(z);
      }
      masks_.clear();
      if (!labels_.empty()) {
        forward_.delta.resize(batch);
        double total = 0.0;
        for (int b = 0; b < batch; ++b) {
          const nn::BceResult r = nn::BceFromLogit(forward_.logits[b], labels_[b]);
          total += r.loss;
          forward_.delta[b] = r.dloss_dlogit;
        }
        forward_.loss = total / batch;
        if (!std::isfinite(forward_.loss)) {
          throw NumericError("non-finite label loss at iteration " +
                             std::to_string(state_.t));
        }
      } else {
        enc_mu_.clear();
      }
      phase_ = Phase::kIdle;
      return {};
    }
    case Phase::kAwaitGradTilde: {
      Expect(m, MessageKind::kMaskedGradTilde, 1, g);
      grad_tilde_.clear();
      for (int i = 0; i < g; ++i) grad_tilde_.push_back(m.plaintexts[i] - masks_[i]);
      masks_.clear();
      phase_ = Phase::kAwaitAccumNoise;
      return {};
    }
    case Phase::kAwaitAccumNoise: {
      Expect(m, MessageKind::kEncAccumNoise, 1, g);
      const phe::FixedPoint eta_q = phe::FixedPoint::Encode(eta_, f);
      for (int i = 0; i < g; ++i) {
        state_.w_tilde_c[i] =
            (state_.w_tilde_c[i] - eta_q * grad_tilde_[i]).RoundedTo(2 * f);
      }
      state_.w_p -= eta_ * grad_p_;
      state_.b -= eta_ * grad_b_;
      if (!state_.w_p.allFinite() || !std::isfinite(state_.b)) {
        throw NumericError("non-finite active-party weights after update");
      }
      ++state_.t;
      // [[W^C_{t+1}]] = [[eps^C_{t+1}]] + W~^C_{t+1}
      std::vector<phe::Ciphertext> enc_w;
      for (int i = 0; i < g; ++i) {
        enc_w.push_back(phe::AddPt(m.ciphertexts[i], state_.w_tilde_c[i]));
      }
      PartyMessage out = Reply(MessageKind::kEncDeltaC, batch, g);
      for (int b = 0; b < batch; ++b) {
        const phe::FixedPoint d = phe::FixedPoint::Encode(forward_.delta[b], f);
        for (int i = 0; i < g; ++i) {
          out.ciphertexts.push_back(phe::MulPt(enc_w[i], d));
        }
      }
      enc_mu_.clear();
      grad_tilde_.clear();
      phase_ = Phase::kIdle;
      return {std::move(out)};
    }
    case Phase::kIdle:
      break;
  }
  throw ProtocolError("party " + std::string(protocol::PartyName(id_)) +
                      " received " + std::string(protocol::KindName(m.kind)) +
                      " outside a round");
}

std::vector<PartyMessage> ActiveParty::BeginBackward(double eta) {
  if (phase_ != Phase::kIdle || forward_.delta.empty() || enc_mu_.empty()) {
    throw ProtocolError("backward leg requires a completed training forward");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw ConfigError("learning rate must be positive");
  }
  eta_ = eta;
  const int batch = static_cast<int>(x_p_.rows());
  const int g = static_cast<int>(state_.w_tilde_c.size());
  const int f = cfg_.frac_bits;

  // Mean-reduced gradients: scale delta by 1/B before the encrypted product.
  std::vector<phe::FixedPoint> scaled;
  Vector delta(batch);
  for (int b = 0; b < batch; ++b) {
    delta[b] = forward_.delta[b];
    scaled.push_back(phe::FixedPoint::Encode(forward_.delta[b] / batch, f));
  }
  PartyMessage out = Reply(MessageKind::kMaskedGradC, 1, g);
  std::vector<phe::Ciphertext> column(batch);
  for (int i = 0; i < g; ++i) {
    for (int b = 0; b < batch; ++b) column[b] = enc_mu_[b * g + i];
    phe::FixedPoint eps = Mask();
    out.ciphertexts.push_back(phe::AddPt(phe::EncDot(column, scaled), eps));
    masks_.push_back(std::move(eps));
  }
  grad_p_ = x_p_.transpose() * delta / batch;
  grad_b_ = delta.mean();
  phase_ = Phase::kAwaitGradTilde;
  return {std::move(out)};
}

// ---------------------------------------------------------------------------
// Passive party.

PassiveParty::PassiveParty(phe::Keypair keys, int g, std::uint64_t encrypt_seed,
                           std::uint64_t noise_seed, const MaskConfig& cfg)
    : keys_(std::move(keys)),
      g_(g),
      encryptor_(keys_.public_key, encrypt_seed),
      decryptor_(keys_.private_key),
      sampler_(noise_seed, cfg),
      cfg_(cfg),
      noise_(MakeNoiseState(g, cfg)) {
  if (g <= 0) throw DimensionError("C needs at least one high-order feature");
}

void PassiveParty::Connect(PartyId peer) {
  if (peer == PartyId::kC) throw ConfigError("C cannot peer with itself");
  if (phase_ != Phase::kIdle) throw ProtocolError("round in progress");
  peer_ = peer;
  noise_ = MakeNoiseState(g_, cfg_);
  retained_mu_.clear();
}

PartyMessage PassiveParty::Reply(MessageKind kind, int rows, int cols) const {
  PartyMessage m;
  m.round_id = round_id_;
  m.iteration = noise_.t;
  m.kind = kind;
  m.sender = PartyId::kC;
  m.receiver = peer_;
  m.rows = rows;
  m.cols = cols;
  return m;
}

std::vector<PartyMessage> PassiveParty::BeginForward(std::int64_t round_id,
                                                     const Matrix& mu,
                                                     bool training) {
  if (phase_ != Phase::kIdle) throw ProtocolError("previous round unfinished");
  if (mu.cols() != g_) {
    throw DimensionError("mu has " + std::to_string(mu.cols()) +
                         " columns, expected g = " + std::to_string(g_));
  }
  if (mu.rows() == 0) throw DimensionError("empty batch");
  if (!mu.allFinite()) throw NumericError("non-finite high-order features");
  round_id_ = round_id;
  training_ = training;
  batch_ = static_cast<int>(mu.rows());
  auto& kept = retained_mu_[round_id];
  kept.clear();
  PartyMessage out = Reply(MessageKind::kEncMu, batch_, g_);
  for (int b = 0; b < batch_; ++b) {
    for (int i = 0; i < g_; ++i) {
      kept.push_back(phe::FixedPoint::Encode(mu(b, i), cfg_.frac_bits));
      out.ciphertexts.push_back(encryptor_.Encrypt(kept.back()));
    }
  }
  phase_ = Phase::kAwaitLogit;
  return {std::move(out)};
}

void PassiveParty::BeginBackward(double eta) {
  if (phase_ != Phase::kIdle || !training_ || !retained_mu_.count(round_id_)) {
    throw ProtocolError("backward leg requires a completed training forward");
  }
  eta_q_ = phe::FixedPoint::Encode(eta, cfg_.frac_bits);
  phase_ = Phase::kAwaitGradC;
}

std::vector<PartyMessage> PassiveParty::Handle(const PartyMessage& m) {
  if (m.kind == MessageKind::kControl &&
      m.control == protocol::ControlCode::kAbort) {
    throw ProtocolError("peer aborted: " + m.detail);
  }
  auto expect = [&](MessageKind kind, int rows, int cols) {
    if (m.kind != kind) {
      throw ProtocolError("C expected " + std::string(protocol::KindName(kind)) +
                          ", got " + std::string(protocol::KindName(m.kind)));
    }
    if (m.sender != peer_ || m.receiver != PartyId::kC) {
      throw ProtocolError("message misrouted");
    }
    if (m.round_id != round_id_) {
      throw ProtocolError("round id mismatch: got " +
                          std::to_string(m.round_id) + ", expected " +
                          std::to_string(round_id_));
    }
    if (m.iteration != noise_.t) {
      throw ProtocolError("iteration desync: " +
                          std::string(protocol::PartyName(m.sender)) + " at " +
                          std::to_string(m.iteration) + ", C at " +
                          std::to_string(noise_.t));
    }
    protocol::ValidateShape(m, rows, cols);
  };
  switch (phase_) {
    case Phase::kAwaitLogit: {
      expect(MessageKind::kMaskedLogit, batch_, 1);
      const auto& mu_q = retained_mu_.at(round_id_);
      PartyMessage out = Reply(MessageKind::kLogitPlusMask, batch_, 1);
      for (int b = 0; b < batch_; ++b) {
        // z~ + eps^p + mu eps^C = z^C + eps^p
        phe::FixedPoint v = decryptor_.DecryptFixed(m.ciphertexts[b]);
        for (int i = 0; i < g_; ++i) v = v + mu_q[b * g_ + i] * noise_.eps[i];
        out.plaintexts.push_back(std::move(v));
      }
      if (!training_) retained_mu_.erase(round_id_);
      phase_ = Phase::kIdle;
      return {std::move(out)};
    }
    case Phase::kAwaitGradC: {
      expect(MessageKind::kMaskedGradC, 1, g_);
      PartyMessage tilde = Reply(MessageKind::kMaskedGradTilde, 1, g_);
      PartyMessage accum = Reply(MessageKind::kEncAccumNoise, 1, g_);
      for (int i = 0; i < g_; ++i) {
        const phe::FixedPoint nu = sampler_.Next();
        tilde.plaintexts.push_back(decryptor_.DecryptFixed(m.ciphertexts[i]) + nu);
        noise_.eps[i] = noise_.eps[i] + eta_q_ * nu;
        accum.ciphertexts.push_back(encryptor_.Encrypt(noise_.eps[i]));
      }
      ++noise_.t;
      phase_ = Phase::kAwaitDeltaC;
      return {std::move(tilde), std::move(accum)};
    }
    case Phase::kAwaitDeltaC: {
      expect(MessageKind::kEncDeltaC, batch_, g_);
      delta_c_.resize(batch_, g_);
      for (int b = 0; b < batch_; ++b) {
        for (int i = 0; i < g_; ++i) {
          delta_c_(b, i) = decryptor_.Decrypt(m.ciphertexts[b * g_ + i]);
        }
      }
      if (!delta_c_.allFinite()) throw NumericError("non-finite delta^C");
      retained_mu_.erase(round_id_);
      phase_ = Phase::kIdle;
      return {};
    }
    case Phase::kIdle:
      break;
  }
  throw ProtocolError("C received " + std::string(protocol::KindName(m.kind)) +
                      " outside a round");
}

// ---------------------------------------------------------------------------

ForwardResult SecureForward(Channel& ch, std::int64_t round_id,
                            const Matrix& mu, const Matrix& x_p,
                            const std::vector<int>& labels) {
  if (mu.rows() != x_p.rows()) {
    throw ProtocolError("batch misalignment: mu and x^p have " +
                        std::to_string(mu.rows()) + " and " +
                        std::to_string(x_p.rows()) + " rows");
  }
  ch.active->BeginForward(round_id, x_p, labels);
  auto first = ch.passive->BeginForward(round_id, mu, !labels.empty());
  protocol::RunPhase(ch.scheduler, *ch.passive, *ch.active, *ch.bus,
                     std::move(first));
  return ch.active->forward_result();
}

Matrix SecureBackward(Channel& ch, double eta) {
  ch.passive->BeginBackward(eta);
  auto first = ch.active->BeginBackward(eta);
  protocol::RunPhase(ch.scheduler, *ch.active, *ch.passive, *ch.bus,
                     std::move(first));
  return ch.passive->delta_c();
}

std::vector<double> SecurePredict(Channel& ch, std::int64_t round_id,
                                  const Matrix& mu, const Matrix& x_p) {
  if (mu.rows() == 0 && x_p.rows() == 0) return {};
  return SecureForward(ch, round_id, mu, x_p, {}).probs;
}

}  // namespace vflda::secure_lr
