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

// Orchestration of federated pre-training (source party B with C),
// fine-tuning (target party A with C) and evaluation. The training loop is
// written once against LabelExchange; the secure implementation runs the
// masked Paillier exchange over a message bus, the plaintext one lives in
// the oracle module.

#ifndef VFLDA_PROTOCOL_H_
#define VFLDA_PROTOCOL_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vflda/adversarial.h"
#include "vflda/data.h"
#include "vflda/message.h"
#include "vflda/nn.h"
#include "vflda/phe.h"
#include "vflda/secure_lr.h"

namespace vflda::protocol {

using nn::Matrix;
using nn::Vector;

struct RunConfig {
  int epochs_pretrain = 3;    // E
  int epochs_finetune = 3;    // K
  int batch_size = 16;
  double eta_pretrain = 0.05;
  double eta_finetune = 0.05;
  double lambda = 0.1;
  // Linear ramp of lambda over the first N pretrain iterations; 0 = off.
  int lambda_warmup = 0;
  bool domain_adaptation = true;  // false skips the adversarial step
  std::uint64_t seed = 0;
  int key_bits = 1024;
  int frac_bits = phe::kDefaultFracBits;
  int noise_bits = 64;
  // Caps the number of iterations per phase; -1 = unlimited.
  std::int64_t max_iterations = -1;
  bool reshuffle = true;        // re-shuffle batch order every epoch
  bool freeze_extractors = false;
  int patience = 0;             // finetune early stopping; 0 = off
  int log_interval = 1;
  bool record_trajectory = false;
  SchedulerKind scheduler = SchedulerKind::kSequential;

  static RunConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
  void Validate() const;
  secure_lr::MaskConfig mask() const { return {frac_bits, noise_bits}; }
};

// Independent RNG streams derived from the run seed.
enum class Stream : std::uint64_t {
  kExtractors = 1,
  kDiscriminators,
  kAggregators,
  kEmbeddings,
  kLrInitB,
  kLrInitA,
  kShuffle,
  kTargetSampling,
  kNoiseB,
  kNoiseA,
  kNoiseC,
  kEncrypt,
  kKeygen,
};
std::uint64_t StreamSeed(std::uint64_t seed, Stream stream);
adversarial::ModelSeeds ModelSeedsFor(std::uint64_t seed);

struct IterationRecord {
  std::string phase;  // "pretrain" or "finetune"
  int epoch = 0;
  std::int64_t iteration = 0;
  double loss_ce = 0.0;
  std::optional<double> loss_adv;
  std::vector<double> group_accuracy;
  // Filled when RunConfig::record_trajectory is set.
  std::vector<double> logits;
  Vector w_c;
  Vector w_p;
  double b = 0.0;
};

struct EpochRecord {
  std::string phase;
  int epoch = 0;
  double loss_ce = 0.0;
  std::optional<double> loss_adv;
  std::vector<double> group_accuracy;
  std::optional<double> validation_loss;
};

struct History {
  std::vector<IterationRecord> iterations;
  std::vector<EpochRecord> epochs;

  void Append(const History& other);
  std::vector<nlohmann::json> ToJsonLines(int log_interval = 1) const;
};

// The label predictor shared by the active party and C. Implementations
// differ only in how the LR arithmetic is carried out.
class LabelExchange {
 public:
  struct Step {
    double loss = 0.0;
    std::vector<double> logits;
    Matrix delta_c;  // per-sample delta^l * W^C_{t+1}, batch x g
  };

  virtual ~LabelExchange() = default;
  // Starts talking to an active party with freshly initialised weights.
  virtual void Connect(PartyId active, const secure_lr::LRWeights& init) = 0;
  virtual Step TrainStep(const Matrix& mu, const Matrix& x_p,
                         const std::vector<int>& labels, double eta) = 0;
  virtual std::vector<double> Predict(const Matrix& mu, const Matrix& x_p) = 0;
  // Current unmasked weights of the connected active party. For the secure
  // exchange this recombines both parties' state (harness only).
  virtual secure_lr::LRWeights Weights() const = 0;
  virtual std::int64_t iteration() const = 0;
  virtual std::string_view name() const = 0;
};

class SecureExchange : public LabelExchange {
 public:
  SecureExchange(phe::Keypair keys, int g, const RunConfig& run,
                 bool keep_payloads = false);

  void Connect(PartyId active, const secure_lr::LRWeights& init) override;
  Step TrainStep(const Matrix& mu, const Matrix& x_p,
                 const std::vector<int>& labels, double eta) override;
  std::vector<double> Predict(const Matrix& mu, const Matrix& x_p) override;
  secure_lr::LRWeights Weights() const override;
  std::int64_t iteration() const override;
  std::string_view name() const override { return "secure"; }

  // Restores a previously trained active party (and C's matching mask).
  void Restore(PartyId active, const secure_lr::SplitLRState& state,
               const secure_lr::NoiseState& noise);

  secure_lr::ActiveParty& active();
  secure_lr::PassiveParty& passive() { return *passive_; }
  MessageBus& bus() { return bus_; }
  bool has_party(PartyId id) const { return actives_.count(id) > 0; }
  std::int64_t rounds() const { return next_round_; }

 private:
  secure_lr::Channel channel();

  phe::Keypair keys_;
  RunConfig run_;
  MessageBus bus_;
  std::unique_ptr<secure_lr::PassiveParty> passive_;
  std::map<PartyId, std::unique_ptr<secure_lr::ActiveParty>> actives_;
  PartyId current_ = PartyId::kB;
  std::int64_t next_round_ = 0;
};

// Forward + backward for one batch, exactly once. Returns delta^C.
Matrix RunAlgorithm3(secure_lr::Channel& ch, std::int64_t round_id,
                     const Matrix& mu, const Matrix& x_p,
                     const std::vector<int>& labels, double eta,
                     secure_lr::ForwardResult* forward = nullptr);

// Aligned per-party views of one domain split.
struct Shards {
  data::PartyView source_p;   // B: x^B, y^B
  data::PartyView source_c;   // C: X^{B^c}
  data::PartyView target_p;   // A: labeled target
  data::PartyView target_c;   // C: X^{A^c} rows of the labeled target
  data::PartyView target_all_c;  // C: labeled + unlabeled target
  data::PartyView test_p;
  data::PartyView test_c;

  static Shards Build(const data::TabularDataset& data,
                      const data::DomainSplit& split);
};

// Active party's design matrix: numeric columns as-is, categoricals one-hot.
Matrix ActiveDesign(const data::TabularDataset& data,
                    const data::PartyView& view,
                    const std::vector<std::size_t>& rows);
int ActiveWidth(const data::TabularDataset& data, const data::PartyView& view);

// Federated pre-training with source party B. C's model may be null for
// runs that ignore party C (A-Local), in which case mu has zero width.
History Pretrain(const RunConfig& run, const data::TabularDataset& data,
                 adversarial::PassiveModel* c_model, LabelExchange& exchange,
                 const data::PartyView& source_p,
                 const data::PartyView& source_c,
                 const data::PartyView& target_c);

// Federated fine-tuning with target party A; R^A starts fresh. Validation
// views enable early stopping when run.patience > 0.
History Finetune(const RunConfig& run, const data::TabularDataset& data,
                 adversarial::PassiveModel* c_model, LabelExchange& exchange,
                 const data::PartyView& target_p,
                 const data::PartyView& target_c,
                 const data::PartyView* validation_p = nullptr,
                 const data::PartyView* validation_c = nullptr);

struct Evaluation {
  double auc = 0.0;
  double ks = 0.0;
  std::vector<double> predictions;
  std::vector<int> labels;
};

Evaluation Evaluate(const RunConfig& run, const data::TabularDataset& data,
                    const adversarial::PassiveModel* c_model,
                    LabelExchange& exchange, const data::PartyView& test_p,
                    const data::PartyView& test_c);

}  // namespace vflda::protocol

#endif  // VFLDA_PROTOCOL_H_
