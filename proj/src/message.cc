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

#include "vflda/message.h"

#include <deque>
#include <exception>
#include <thread>

#include "vflda/errors.h"

namespace vflda::protocol {
namespace {

struct KindRule {
  bool from_passive;  // true: C -> p, false: p -> C
  bool ciphertext;    // payload type
};

KindRule RuleFor(MessageKind k) {
  switch (k) {
    case MessageKind::kEncMu:
      return {true, true};
    case MessageKind::kMaskedLogit:
      return {false, true};
    case MessageKind::kLogitPlusMask:
      return {true, false};
    case MessageKind::kMaskedGradC:
      return {false, true};
    case MessageKind::kMaskedGradTilde:
      return {true, false};
    case MessageKind::kEncAccumNoise:
      return {true, true};
    case MessageKind::kEncDeltaC:
      return {false, true};
    case MessageKind::kControl:
      return {false, false};
  }
  return {false, false};
}

std::string Describe(const PartyMessage& m) {
  return std::string(KindName(m.kind)) + " " +
         std::string(PartyName(m.sender)) + "->" +
         std::string(PartyName(m.receiver)) + " (round " +
         std::to_string(m.round_id) + ")";
}

}  // namespace

std::string_view PartyName(PartyId p) {
  switch (p) {
    case PartyId::kA:
      return "A";
    case PartyId::kB:
      return "B";
    case PartyId::kC:
      return "C";
  }
  return "?";
}

std::string_view KindName(MessageKind k) {
  switch (k) {
    case MessageKind::kEncMu:
      return "EncMu";
    case MessageKind::kMaskedLogit:
      return "MaskedLogit";
    case MessageKind::kLogitPlusMask:
      return "LogitPlusMask";
    case MessageKind::kMaskedGradC:
      return "MaskedGradC";
    case MessageKind::kMaskedGradTilde:
      return "MaskedGradTilde";
    case MessageKind::kEncAccumNoise:
      return "EncAccumNoise";
    case MessageKind::kEncDeltaC:
      return "EncDeltaC";
    case MessageKind::kControl:
      return "Control";
  }
  return "?";
}

void ValidateSchema(const PartyMessage& m) {
  const bool sender_active = m.is_active(m.sender);
  const bool receiver_active = m.is_active(m.receiver);
  if (sender_active == receiver_active) {
    throw ProtocolError(Describe(m) +
                        ": messages must travel between p and C");
  }
  if (m.kind == MessageKind::kControl) {
    if (!m.ciphertexts.empty() || !m.plaintexts.empty()) {
      throw ProtocolError(Describe(m) + ": control messages carry no payload");
    }
    return;
  }
  const KindRule rule = RuleFor(m.kind);
  if (rule.from_passive != !sender_active) {
    throw ProtocolError(Describe(m) + ": wrong direction for this kind");
  }
  const std::size_t expected = static_cast<std::size_t>(m.rows) * m.cols;
  if (m.rows < 0 || m.cols < 0) {
    throw ProtocolError(Describe(m) + ": negative shape");
  }
  if (rule.ciphertext) {
    if (!m.plaintexts.empty() || m.ciphertexts.size() != expected) {
      throw ProtocolError(Describe(m) +
                          ": expected exactly rows x cols ciphertexts");
    }
  } else {
    if (!m.ciphertexts.empty() || m.plaintexts.size() != expected) {
      throw ProtocolError(Describe(m) +
                          ": expected exactly rows x cols plaintexts");
    }
  }
}

void ValidateShape(const PartyMessage& m, int rows, int cols) {
  ValidateSchema(m);
  if (m.rows != rows || m.cols != cols) {
    throw ProtocolError(Describe(m) + ": shape " + std::to_string(m.rows) +
                        "x" + std::to_string(m.cols) + ", expected " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        " (batch misalignment)");
  }
}

nlohmann::json Envelope(const PartyMessage& m) {
  nlohmann::json digests = nlohmann::json::array();
  for (const auto& c : m.ciphertexts) digests.push_back(phe::Digest(c.value));
  for (const auto& p : m.plaintexts) digests.push_back(phe::Digest(p.mantissa));
  nlohmann::json j = {{"round", m.round_id},
                      {"iteration", m.iteration},
                      {"kind", KindName(m.kind)},
                      {"from", PartyName(m.sender)},
                      {"to", PartyName(m.receiver)},
                      {"rows", m.rows},
                      {"cols", m.cols},
                      {"encrypted", !m.ciphertexts.empty()},
                      {"digests", digests}};
  if (m.kind == MessageKind::kControl) {
    j["control"] = m.control == ControlCode::kAbort ? "abort" : "none";
  }
  return j;
}

void MessageBus::Record(const PartyMessage& m) {
  ValidateSchema(m);
  nlohmann::json env = Envelope(m);
  std::lock_guard<std::mutex> lock(mu_);
  envelopes_.push_back(std::move(env));
  if (keep_payloads_) trace_.push_back(m);
}

std::size_t MessageBus::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return envelopes_.size();
}

std::vector<PartyMessage> MessageBus::trace() const {
  std::lock_guard<std::mutex> lock(mu_);
  return trace_;
}

std::vector<nlohmann::json> MessageBus::envelopes() const {
  std::lock_guard<std::mutex> lock(mu_);
  return envelopes_;
}

void MessageBus::WriteTranscript(std::ostream& out) const {
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& e : envelopes_) out << e.dump() << "\n";
}

void MessageBus::Clear() {
  std::lock_guard<std::mutex> lock(mu_);
  trace_.clear();
  envelopes_.clear();
}

SchedulerKind ParseScheduler(std::string_view name) {
  if (name == "sequential") return SchedulerKind::kSequential;
  if (name == "threaded") return SchedulerKind::kThreaded;
  throw ConfigError("unknown scheduler '" + std::string(name) +
                    "' (expected sequential or threaded)");
}

namespace {

Endpoint& Target(Endpoint& a, Endpoint& b, const PartyMessage& m) {
  if (m.receiver == a.id()) return a;
  if (m.receiver == b.id()) return b;
  throw ProtocolError("message " + std::string(KindName(m.kind)) +
                      " addressed to unknown party " +
                      std::string(PartyName(m.receiver)));
}

void RunSequential(Endpoint& a, Endpoint& b, MessageBus& bus,
                   std::vector<PartyMessage> initial) {
  std::deque<PartyMessage> queue;
  for (auto& m : initial) {
    bus.Record(m);
    queue.push_back(std::move(m));
  }
  while (!queue.empty()) {
    PartyMessage m = std::move(queue.front());
    queue.pop_front();
    for (auto& out : Target(a, b, m).Handle(m)) {
      bus.Record(out);
      queue.push_back(std::move(out));
    }
  }
  if (!a.PhaseDone() || !b.PhaseDone()) {
    throw ProtocolError("exchange stalled before both parties finished");
  }
}

class Inbox {
 public:
  void Push(PartyMessage m) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      queue_.push_back(std::move(m));
    }
    cv_.notify_one();
  }
  PartyMessage Pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty(); });
    PartyMessage m = std::move(queue_.front());
    queue_.pop_front();
    return m;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<PartyMessage> queue_;
};

void RunThreaded(Endpoint& a, Endpoint& b, MessageBus& bus,
                 std::vector<PartyMessage> initial) {
  Inbox inbox_a, inbox_b;
  auto post = [&](PartyMessage m) {
    bus.Record(m);
    if (m.receiver == a.id()) {
      inbox_a.Push(std::move(m));
    } else if (m.receiver == b.id()) {
      inbox_b.Push(std::move(m));
    } else {
      throw ProtocolError("message addressed to unknown party");
    }
  };
  for (auto& m : initial) post(std::move(m));

  std::exception_ptr errors[2];
  auto loop = [&](Endpoint& self, Endpoint& peer, Inbox& inbox, int slot) {
    try {
      while (!self.PhaseDone()) {
        PartyMessage m = inbox.Pop();
        if (m.kind == MessageKind::kControl &&
            m.control == ControlCode::kAbort) {
          throw ProtocolError("peer aborted: " + m.detail);
        }
        for (auto& out : self.Handle(m)) post(std::move(out));
      }
    } catch (...) {
      errors[slot] = std::current_exception();
      PartyMessage abort;
      abort.kind = MessageKind::kControl;
      abort.control = ControlCode::kAbort;
      abort.sender = self.id();
      abort.receiver = peer.id();
      abort.detail = "party " + std::string(PartyName(self.id())) + " failed";
      // Unblock the peer without recording the abort as protocol traffic.
      (peer.id() == a.id() ? inbox_a : inbox_b).Push(std::move(abort));
    }
  };
  std::thread ta(loop, std::ref(a), std::ref(b), std::ref(inbox_a), 0);
  std::thread tb(loop, std::ref(b), std::ref(a), std::ref(inbox_b), 1);
  ta.join();
  tb.join();
  // Prefer the original failure over the induced abort.
  for (auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const ProtocolError& pe) {
      if (std::string_view(pe.what()).starts_with("peer aborted")) continue;
      throw;
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void RunPhase(SchedulerKind kind, Endpoint& first, Endpoint& second,
              MessageBus& bus, std::vector<PartyMessage> initial) {
  if (kind == SchedulerKind::kSequential) {
    RunSequential(first, second, bus, std::move(initial));
  } else {
    RunThreaded(first, second, bus, std::move(initial));
  }
}

}  // namespace vflda::protocol
