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

// Typed messages exchanged between the active party p (A or B) and the
// passive party C, plus an in-process bus that records every envelope.

#ifndef VFLDA_MESSAGE_H_
#define VFLDA_MESSAGE_H_

#include <cstdint>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vflda/phe.h"

namespace vflda::protocol {

enum class PartyId { kA, kB, kC };

enum class MessageKind {
  kEncMu,            // C -> p: [[mu]], batch x g
  kMaskedLogit,      // p -> C: [[z~ + eps_p]], batch x 1
  kLogitPlusMask,    // C -> p: z^C + eps_p (plaintext), batch x 1
  kMaskedGradC,      // p -> C: [[dW^C + eps_p]], 1 x g
  kMaskedGradTilde,  // C -> p: dW~^C + eps_p (plaintext), 1 x g
  kEncAccumNoise,    // C -> p: [[eps^C_{t+1}]], 1 x g
  kEncDeltaC,        // p -> C: [[delta^C]], batch x g
  kControl,          // either direction, no payload
};

enum class ControlCode { kNone, kAbort };

std::string_view PartyName(PartyId p);
std::string_view KindName(MessageKind k);

struct PartyMessage {
  std::int64_t round_id = 0;
  std::int64_t iteration = 0;
  MessageKind kind = MessageKind::kControl;
  PartyId sender = PartyId::kC;
  PartyId receiver = PartyId::kC;
  int rows = 0;
  int cols = 0;
  std::vector<phe::Ciphertext> ciphertexts;
  std::vector<phe::FixedPoint> plaintexts;
  ControlCode control = ControlCode::kNone;
  std::string detail;  // abort reason

  bool is_active(PartyId p) const { return p == PartyId::kA || p == PartyId::kB; }
};

// Throws ProtocolError unless the message respects the schema for its kind:
// direction, payload type (ciphertext vs plaintext) and rows x cols count.
void ValidateSchema(const PartyMessage& m);
// Additionally pins the expected shape.
void ValidateShape(const PartyMessage& m, int rows, int cols);

// Digest-only envelope for audit transcripts; never carries plaintexts.
nlohmann::json Envelope(const PartyMessage& m);

class MessageBus {
 public:
  explicit MessageBus(bool keep_payloads = false)
      : keep_payloads_(keep_payloads) {}

  // Validates and records a message in send order.
  void Record(const PartyMessage& m);

  std::size_t size() const;
  // Full messages, only when constructed with keep_payloads.
  std::vector<PartyMessage> trace() const;
  std::vector<nlohmann::json> envelopes() const;
  void WriteTranscript(std::ostream& out) const;
  void Clear();

 private:
  bool keep_payloads_;
  mutable std::mutex mu_;
  std::vector<PartyMessage> trace_;
  std::vector<nlohmann::json> envelopes_;
};

// A party that reacts to incoming messages. A "phase" is one leg of the
// exchange (forward or backward); the endpoint reports when its share of
// the phase has finished.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual PartyId id() const = 0;
  virtual std::vector<PartyMessage> Handle(const PartyMessage& m) = 0;
  virtual bool PhaseDone() const = 0;
};

enum class SchedulerKind { kSequential, kThreaded };

SchedulerKind ParseScheduler(std::string_view name);

// Delivers `initial` and every reply until both endpoints report the phase
// done. Sequential mode dispatches from one FIFO queue on the calling
// thread; threaded mode runs each endpoint on its own thread with blocking
// receives. Any exception is rethrown on the calling thread.
void RunPhase(SchedulerKind kind, Endpoint& first, Endpoint& second,
              MessageBus& bus, std::vector<PartyMessage> initial);

}  // namespace vflda::protocol

#endif  // VFLDA_MESSAGE_H_
