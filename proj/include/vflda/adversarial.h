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

// Party C's local models: per-group feature extractors, domain
// discriminators and scalar aggregators, the adversarial min-max step and
// the high-order feature computation fed to the split label predictor.

#ifndef VFLDA_ADVERSARIAL_H_
#define VFLDA_ADVERSARIAL_H_

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vflda/data.h"
#include "vflda/grouping.h"
#include "vflda/nn.h"

namespace vflda::adversarial {

struct GroupModel {
  nn::DenseNet extractor;      // F_i, leaky-ReLU throughout
  nn::DenseNet discriminator;  // D_i, outputs a domain logit
  nn::DenseNet aggregator;     // G_i, single identity layer -> scalar

  friend bool operator==(const GroupModel&, const GroupModel&) = default;
};

struct ArchitectureConfig {
  // Group name -> "FC(a->b)-..." extractor string. Groups without an entry
  // use DefaultExtractorDims.
  std::map<std::string, std::string> extractors;
  // Hidden widths of every discriminator; empty means one hidden layer as
  // wide as the extractor output.
  std::vector<int> discriminator_hidden;

  static ArchitectureConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

// FC(d->2d)-FC(2d->d)-FC(d->max(2, d/2)).
std::vector<int> DefaultExtractorDims(int input_dim);

struct ModelSeeds {
  std::uint64_t extractors = 1;
  std::uint64_t discriminators = 2;
  std::uint64_t aggregators = 3;
  std::uint64_t embeddings = 4;
};

class GroupModels {
 public:
  GroupModels() = default;
  GroupModels(const std::vector<std::string>& group_names,
              const std::vector<int>& input_dims,
              const ArchitectureConfig& arch, const ModelSeeds& seeds);

  int size() const { return static_cast<int>(groups_.size()); }
  const GroupModel& group(int i) const { return groups_.at(i); }
  GroupModel& mutable_group(int i) { return groups_.at(i); }
  const std::vector<GroupModel>& groups() const { return groups_; }

  nlohmann::json ToJson() const;
  static GroupModels FromJson(const nlohmann::json& j);

  friend bool operator==(const GroupModels&, const GroupModels&) = default;

 private:
  std::vector<GroupModel> groups_;
};

struct AdvStepResult {
  double loss = 0;                    // L_adv before the update
  std::vector<double> group_loss;     // per-group terms of L_adv
  std::vector<double> group_accuracy; // discriminator accuracy per group
  // d(-lambda * L_adv)/d input, i.e. what reaches the group inputs through
  // the gradient reversal layer.
  std::vector<nn::Matrix> source_input_grads;
  std::vector<nn::Matrix> target_input_grads;
};

struct AdvGradients {
  AdvStepResult stats;
  std::vector<nn::DenseGrads> discriminator;  // dL_adv/dtheta_d
  std::vector<nn::DenseGrads> extractor;      // -lambda * dL_adv/dtheta_f
};

AdvGradients ComputeAdversarialGradients(const GroupModels& models,
                                         const grouping::GroupedBatch& source,
                                         const grouping::GroupedBatch& target,
                                         double lambda);

// One simultaneous min-max step. Domain labels: target = 1, source = 0.
// L_adv = -sum_i mean_target log D_i(F_i(x)) - sum_i mean_source
// log(1 - D_i(F_i(x))). Discriminators descend L_adv; extractors receive
// the reversed gradient -lambda * dL_adv/dtheta_f. All gradients are
// computed before any parameter changes.
AdvStepResult DomainAdvStep(GroupModels& models,
                            const grouping::GroupedBatch& source,
                            const grouping::GroupedBatch& target,
                            double lambda, double eta);

// Evaluates L_adv and accuracy without updating anything.
AdvStepResult EvaluateDomainLoss(const GroupModels& models,
                                 const grouping::GroupedBatch& source,
                                 const grouping::GroupedBatch& target);

// mu[:, i] = G_i(F_i(x_(i))).
nn::Matrix AggregateHighOrder(const GroupModels& models,
                              const grouping::GroupedBatch& batch);

// Forward state retained by party C between computing mu and receiving
// d loss / d mu.
struct HighOrderPass {
  grouping::GroupedBatch batch;
  std::vector<nn::Tape> extractor_tapes;
  std::vector<nn::Tape> aggregator_tapes;
  nn::Matrix mu;  // batch x g
};

// Everything party C trains locally: embeddings plus per-group models.
class PassiveModel {
 public:
  PassiveModel() = default;
  PassiveModel(grouping::GroupEncoder encoder, GroupModels models);
  static PassiveModel Create(const grouping::FeatureGroupSpec& spec,
                             const data::TabularDataset& schema_source,
                             const ArchitectureConfig& arch,
                             const ModelSeeds& seeds);

  const grouping::GroupEncoder& encoder() const { return encoder_; }
  const GroupModels& models() const { return models_; }
  GroupModels& mutable_models() { return models_; }
  int g() const { return models_.size(); }

  // When frozen, label-loss updates only touch the aggregators.
  void set_freeze_extractors(bool frozen) { freeze_extractors_ = frozen; }

  HighOrderPass Forward(const data::PartyView& view,
                        const std::vector<std::size_t>& rows) const;
  nn::Matrix HighOrder(const data::PartyView& view,
                       const std::vector<std::size_t>& rows) const;

  // Applies d loss / d mu (batch x g, already divided by the batch size for
  // a mean loss) to aggregators, extractors and embeddings.
  void Backprop(const HighOrderPass& pass, const nn::Matrix& dmu, double eta);

  AdvStepResult AdversarialStep(const data::PartyView& source_view,
                                const std::vector<std::size_t>& source_rows,
                                const data::PartyView& target_view,
                                const std::vector<std::size_t>& target_rows,
                                double lambda, double eta);

  nlohmann::json ToJson() const;
  void LoadJson(const nlohmann::json& j);

  friend bool operator==(const PassiveModel& a, const PassiveModel& b);

 private:
  grouping::GroupEncoder encoder_;
  GroupModels models_;
  bool freeze_extractors_ = false;
};

}  // namespace vflda::adversarial

#endif  // VFLDA_ADVERSARIAL_H_
