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

// Plaintext reference pipeline: the same training loop and model code as
// the secure path with the label exchange done in float64.

#ifndef VFLDA_ORACLE_H_
#define VFLDA_ORACLE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "vflda/adversarial.h"
#include "vflda/data.h"
#include "vflda/grouping.h"
#include "vflda/protocol.h"

namespace vflda::oracle {

using nn::Matrix;
using nn::Vector;

class PlainExchange : public protocol::LabelExchange {
 public:
  void Connect(protocol::PartyId active,
               const secure_lr::LRWeights& init) override;
  Step TrainStep(const Matrix& mu, const Matrix& x_p,
                 const std::vector<int>& labels, double eta) override;
  std::vector<double> Predict(const Matrix& mu, const Matrix& x_p) override;
  secure_lr::LRWeights Weights() const override;
  std::int64_t iteration() const override;
  std::string_view name() const override { return "plain"; }

  // Fault injection for tests.
  secure_lr::LRWeights& mutable_weights();

 private:
  struct Party {
    secure_lr::LRWeights w;
    std::int64_t t = 0;
  };
  const Party& current() const;
  std::map<protocol::PartyId, Party> parties_;
  protocol::PartyId current_ = protocol::PartyId::kB;
};

enum class Setting { kALocal, kAVFL, kABVFL, kBtoA };
Setting ParseSetting(std::string_view name);
std::string_view SettingName(Setting s);

struct OracleResult {
  std::optional<adversarial::PassiveModel> c_model;  // absent for A-Local
  secure_lr::LRWeights weights;
  protocol::History history;
  protocol::Evaluation evaluation;
};

// A-Local: LR on x^A over the labeled target rows.
// A-VFL:   A + C columns, labeled target rows only.
// AB-VFL:  A + C columns, source plus labeled target rows, no adaptation.
// B->A:    pre-train with B (adaptation per run.domain_adaptation), then
//          fine-tune with A.
OracleResult OracleTrain(const protocol::RunConfig& run,
                         const data::TabularDataset& data,
                         const data::DomainSplit& split,
                         const grouping::FeatureGroupSpec& spec,
                         const adversarial::ArchitectureConfig& arch,
                         Setting setting);

// tol(t) = t * c * 2^-frac_bits, with t counted from 1.
inline constexpr double kToleranceConstant = 8192.0;
double Tolerance(std::int64_t t, int frac_bits,
                 double c = kToleranceConstant);

struct TrajectoryReport {
  bool pass = true;
  std::int64_t iterations = 0;
  double max_weight_divergence = 0.0;
  double max_logit_divergence = 0.0;
  std::vector<double> divergence;  // per iteration, weights and logits
  std::optional<std::int64_t> first_failure;
  int frac_bits = 0;
  double constant = 0.0;

  nlohmann::json ToJson() const;
  std::string Summary() const;
};

// Both histories must carry trajectories (run.record_trajectory).
TrajectoryReport CompareTrajectories(const protocol::History& secure,
                                     const protocol::History& plain,
                                     int frac_bits,
                                     double c = kToleranceConstant);

// Secure and plaintext pre-training from identical seeds, capped at
// `iterations` label-exchange rounds, compared step by step.
struct VerifyResult {
  protocol::History secure;
  protocol::History plain;
  TrajectoryReport report;
  double secure_seconds = 0.0;
  double plain_seconds = 0.0;
};

VerifyResult VerifyProtocol(protocol::RunConfig run,
                            const data::TabularDataset& data,
                            const data::DomainSplit& split,
                            const grouping::FeatureGroupSpec& spec,
                            const adversarial::ArchitectureConfig& arch,
                            const phe::Keypair& keys, std::int64_t iterations,
                            double c = kToleranceConstant);

}  // namespace vflda::oracle

#endif  // VFLDA_ORACLE_H_
