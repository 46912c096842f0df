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

#include "vflda/adversarial.h"

#include <cmath>
#include <sstream>

#include "vflda/errors.h"

namespace vflda::adversarial {
namespace {

struct GroupPass {
  nn::Tape ext_src, ext_tgt, disc_src, disc_tgt;
  nn::Matrix logit_src, logit_tgt;
};

// Computes L_adv terms and all gradients for one group without touching
// parameters.
void GroupAdversarialGradients(const GroupModel& m, const nn::Matrix& xs,
                               const nn::Matrix& xt, double lambda,
                               nn::DenseGrads* disc_grads,
                               nn::DenseGrads* ext_grads, double* loss,
                               double* accuracy, nn::Matrix* src_input_grad,
                               nn::Matrix* tgt_input_grad) {
  if (xs.rows() == 0 || xt.rows() == 0) {
    throw DimensionError("adversarial step needs non-empty source and target");
  }
  GroupPass p;
  const nn::Matrix fs = m.extractor.Forward(xs, &p.ext_src);
  const nn::Matrix ft = m.extractor.Forward(xt, &p.ext_tgt);
  p.logit_src = m.discriminator.Forward(nn::GrlForward(fs), &p.disc_src);
  p.logit_tgt = m.discriminator.Forward(nn::GrlForward(ft), &p.disc_tgt);

  const double ns = static_cast<double>(xs.rows());
  const double nt = static_cast<double>(xt.rows());
  nn::Matrix up_src(xs.rows(), 1), up_tgt(xt.rows(), 1);
  double l = 0;
  int correct = 0;
  for (Eigen::Index r = 0; r < xt.rows(); ++r) {
    const auto b = nn::BceFromLogit(p.logit_tgt(r, 0), 1);
    l += b.loss / nt;
    up_tgt(r, 0) = b.dloss_dlogit / nt;
    correct += p.logit_tgt(r, 0) > 0 ? 1 : 0;
  }
  for (Eigen::Index r = 0; r < xs.rows(); ++r) {
    const auto b = nn::BceFromLogit(p.logit_src(r, 0), 0);
    l += b.loss / ns;
    up_src(r, 0) = b.dloss_dlogit / ns;
    correct += p.logit_src(r, 0) > 0 ? 0 : 1;
  }
  *loss = l;
  *accuracy = correct / (ns + nt);

  if (disc_grads == nullptr) return;
  *disc_grads = nn::DenseGrads::ZerosLike(m.discriminator);
  *ext_grads = nn::DenseGrads::ZerosLike(m.extractor);
  const nn::Matrix dfs =
      nn::GrlBackward(m.discriminator.Backward(p.disc_src, up_src, disc_grads),
                      lambda);
  const nn::Matrix dft =
      nn::GrlBackward(m.discriminator.Backward(p.disc_tgt, up_tgt, disc_grads),
                      lambda);
  *src_input_grad = m.extractor.Backward(p.ext_src, dfs, ext_grads);
  *tgt_input_grad = m.extractor.Backward(p.ext_tgt, dft, ext_grads);
}

AdvGradients RunAdversarial(const GroupModels& models,
                            const grouping::GroupedBatch& source,
                            const grouping::GroupedBatch& target,
                            double lambda, bool with_grads) {
  const int g = models.size();
  if (static_cast<int>(source.inputs.size()) != g ||
      static_cast<int>(target.inputs.size()) != g) {
    throw DimensionError("adversarial step: batch group count != model count");
  }
  AdvGradients out;
  AdvStepResult& result = out.stats;
  result.group_loss.resize(g);
  result.group_accuracy.resize(g);
  result.source_input_grads.resize(g);
  result.target_input_grads.resize(g);
  out.discriminator.resize(g);
  out.extractor.resize(g);
  for (int i = 0; i < g; ++i) {
    GroupAdversarialGradients(
        models.group(i), source.inputs[i], target.inputs[i], lambda,
        with_grads ? &out.discriminator[i] : nullptr,
        with_grads ? &out.extractor[i] : nullptr, &result.group_loss[i],
        &result.group_accuracy[i], &result.source_input_grads[i],
        &result.target_input_grads[i]);
    result.loss += result.group_loss[i];
  }
  if (!std::isfinite(result.loss)) {
    std::ostringstream os;
    os << "non-finite adversarial loss; per-group terms:";
    for (int i = 0; i < g; ++i) os << " " << result.group_loss[i];
    throw NumericError(os.str());
  }
  return out;
}

}  // namespace

ArchitectureConfig ArchitectureConfig::FromJson(const nlohmann::json& j) {
  ArchitectureConfig a;
  if (j.contains("extractors")) {
    for (auto& [k, v] : j["extractors"].items()) {
      a.extractors[k] = v.get<std::string>();
    }
  }
  a.discriminator_hidden =
      j.value("discriminator_hidden", std::vector<int>{});
  return a;
}

nlohmann::json ArchitectureConfig::ToJson() const {
  return {{"extractors", extractors},
          {"discriminator_hidden", discriminator_hidden}};
}

std::vector<int> DefaultExtractorDims(int input_dim) {
  return {input_dim, 2 * input_dim, input_dim, std::max(2, input_dim / 2)};
}

GroupModels::GroupModels(const std::vector<std::string>& group_names,
                         const std::vector<int>& input_dims,
                         const ArchitectureConfig& arch,
                         const ModelSeeds& seeds) {
  if (group_names.size() != input_dims.size()) {
    throw DimensionError("group names and input dims differ in length");
  }
  nn::Rng ext_rng(seeds.extractors);
  nn::Rng disc_rng(seeds.discriminators);
  nn::Rng agg_rng(seeds.aggregators);
  for (std::size_t i = 0; i < input_dims.size(); ++i) {
    std::vector<int> dims;
    auto it = arch.extractors.find(group_names[i]);
    if (it != arch.extractors.end()) {
      dims = nn::ParseArchitecture(it->second);
      if (dims.front() != input_dims[i]) {
        throw ConfigError("architectures.extractors." + group_names[i] +
                          ": first layer expects " +
                          std::to_string(dims.front()) +
                          " inputs but the group assembles " +
                          std::to_string(input_dims[i]));
      }
    } else {
      dims = DefaultExtractorDims(input_dims[i]);
    }
    const int feat = dims.back();
    std::vector<int> disc_dims = {feat};
    if (arch.discriminator_hidden.empty()) {
      disc_dims.push_back(feat);
    } else {
      disc_dims.insert(disc_dims.end(), arch.discriminator_hidden.begin(),
                       arch.discriminator_hidden.end());
    }
    disc_dims.push_back(1);
    const std::vector<int> agg_dims = {feat, 1};
    GroupModel m;
    m.extractor = nn::DenseNet::Create(dims, nn::Activation::kLeakyRelu,
                                       nn::Activation::kLeakyRelu, ext_rng);
    m.discriminator =
        nn::DenseNet::Create(disc_dims, nn::Activation::kLeakyRelu,
                             nn::Activation::kIdentity, disc_rng);
    m.aggregator = nn::DenseNet::Create(agg_dims, nn::Activation::kIdentity,
                                        nn::Activation::kIdentity, agg_rng);
    groups_.push_back(std::move(m));
  }
}

nlohmann::json GroupModels::ToJson() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : groups_) {
    arr.push_back({{"extractor", nn::NetToJson(m.extractor)},
                   {"discriminator", nn::NetToJson(m.discriminator)},
                   {"aggregator", nn::NetToJson(m.aggregator)}});
  }
  return arr;
}

GroupModels GroupModels::FromJson(const nlohmann::json& j) {
  GroupModels out;
  for (const auto& mj : j) {
    GroupModel m;
    m.extractor = nn::NetFromJson(mj.at("extractor"));
    m.discriminator = nn::NetFromJson(mj.at("discriminator"));
    m.aggregator = nn::NetFromJson(mj.at("aggregator"));
    if (m.extractor.out_dim() != m.discriminator.in_dim() ||
        m.extractor.out_dim() != m.aggregator.in_dim() ||
        m.aggregator.out_dim() != 1 || m.discriminator.out_dim() != 1) {
      throw ConfigError("checkpoint: inconsistent group model shapes");
    }
    out.groups_.push_back(std::move(m));
  }
  return out;
}

AdvGradients ComputeAdversarialGradients(const GroupModels& models,
                                         const grouping::GroupedBatch& source,
                                         const grouping::GroupedBatch& target,
                                         double lambda) {
  return RunAdversarial(models, source, target, lambda, true);
}

AdvStepResult DomainAdvStep(GroupModels& models,
                            const grouping::GroupedBatch& source,
                            const grouping::GroupedBatch& target,
                            double lambda, double eta) {
  AdvGradients grads = RunAdversarial(models, source, target, lambda, true);
  for (int i = 0; i < models.size(); ++i) {
    auto& m = models.mutable_group(i);
    m.discriminator.SgdStep(grads.discriminator[i], eta);
    if (lambda != 0.0) m.extractor.SgdStep(grads.extractor[i], eta);
  }
  return std::move(grads.stats);
}

AdvStepResult EvaluateDomainLoss(const GroupModels& models,
                                 const grouping::GroupedBatch& source,
                                 const grouping::GroupedBatch& target) {
  return RunAdversarial(models, source, target, 0.0, false).stats;
}

nn::Matrix AggregateHighOrder(const GroupModels& models,
                              const grouping::GroupedBatch& batch) {
  if (static_cast<int>(batch.inputs.size()) != models.size()) {
    throw DimensionError("high-order features: batch has " +
                         std::to_string(batch.inputs.size()) +
                         " groups, models have " +
                         std::to_string(models.size()));
  }
  nn::Matrix mu(batch.batch_size(), models.size());
  for (int i = 0; i < models.size(); ++i) {
    const auto& m = models.group(i);
    mu.col(i) = m.aggregator.Forward(m.extractor.Forward(batch.inputs[i]));
  }
  return mu;
}

PassiveModel::PassiveModel(grouping::GroupEncoder encoder, GroupModels models)
    : encoder_(std::move(encoder)), models_(std::move(models)) {
  if (encoder_.spec().g() != models_.size()) {
    throw DimensionError("passive model: encoder and models disagree on g");
  }
}

PassiveModel PassiveModel::Create(const grouping::FeatureGroupSpec& spec,
                                  const data::TabularDataset& schema_source,
                                  const ArchitectureConfig& arch,
                                  const ModelSeeds& seeds) {
  nn::Rng emb_rng(seeds.embeddings);
  grouping::GroupEncoder encoder(spec, schema_source, emb_rng);
  std::vector<std::string> names;
  for (const auto& g : spec.groups()) names.push_back(g.name);
  GroupModels models(names, encoder.group_input_dims(), arch, seeds);
  return PassiveModel(std::move(encoder), std::move(models));
}

HighOrderPass PassiveModel::Forward(const data::PartyView& view,
                                    const std::vector<std::size_t>& rows) const {
  HighOrderPass pass;
  pass.batch = encoder_.Assemble(view, rows);
  const int g = models_.size();
  pass.extractor_tapes.resize(g);
  pass.aggregator_tapes.resize(g);
  pass.mu.resize(pass.batch.batch_size(), g);
  for (int i = 0; i < g; ++i) {
    const auto& m = models_.group(i);
    const nn::Matrix f =
        m.extractor.Forward(pass.batch.inputs[i], &pass.extractor_tapes[i]);
    pass.mu.col(i) = m.aggregator.Forward(f, &pass.aggregator_tapes[i]);
  }
  return pass;
}

nn::Matrix PassiveModel::HighOrder(const data::PartyView& view,
                                   const std::vector<std::size_t>& rows) const {
  return AggregateHighOrder(models_, encoder_.Assemble(view, rows));
}

void PassiveModel::Backprop(const HighOrderPass& pass, const nn::Matrix& dmu,
                            double eta) {
  const int g = models_.size();
  if (dmu.rows() != pass.mu.rows() || dmu.cols() != g) {
    throw DimensionError("backprop: d loss / d mu has the wrong shape");
  }
  std::vector<nn::DenseGrads> agg_grads(g), ext_grads(g);
  std::vector<nn::Matrix> input_grads(g);
  for (int i = 0; i < g; ++i) {
    const auto& m = models_.group(i);
    agg_grads[i] = nn::DenseGrads::ZerosLike(m.aggregator);
    const nn::Matrix df =
        m.aggregator.Backward(pass.aggregator_tapes[i], dmu.col(i), &agg_grads[i]);
    if (!freeze_extractors_) {
      ext_grads[i] = nn::DenseGrads::ZerosLike(m.extractor);
      input_grads[i] =
          m.extractor.Backward(pass.extractor_tapes[i], df, &ext_grads[i]);
    }
  }
  grouping::EmbeddingGrads emb_grads;
  if (!freeze_extractors_) {
    emb_grads = encoder_.ZeroGrads();
    encoder_.AccumulateEmbeddingGrads(pass.batch, input_grads, &emb_grads);
  }
  for (int i = 0; i < g; ++i) {
    auto& m = models_.mutable_group(i);
    m.aggregator.SgdStep(agg_grads[i], eta);
    if (!freeze_extractors_) m.extractor.SgdStep(ext_grads[i], eta);
  }
  if (!freeze_extractors_) encoder_.SgdStep(emb_grads, eta);
}

AdvStepResult PassiveModel::AdversarialStep(
    const data::PartyView& source_view,
    const std::vector<std::size_t>& source_rows,
    const data::PartyView& target_view,
    const std::vector<std::size_t>& target_rows, double lambda, double eta) {
  const auto src = encoder_.Assemble(source_view, source_rows);
  const auto tgt = encoder_.Assemble(target_view, target_rows);
  AdvStepResult r = DomainAdvStep(models_, src, tgt, lambda, eta);
  if (lambda != 0.0 && !encoder_.embeddings().empty()) {
    auto grads = encoder_.ZeroGrads();
    encoder_.AccumulateEmbeddingGrads(src, r.source_input_grads, &grads);
    encoder_.AccumulateEmbeddingGrads(tgt, r.target_input_grads, &grads);
    encoder_.SgdStep(grads, eta);
  }
  return r;
}

nlohmann::json PassiveModel::ToJson() const {
  return {{"encoder", encoder_.ToJson()}, {"models", models_.ToJson()}};
}

void PassiveModel::LoadJson(const nlohmann::json& j) {
  GroupModels loaded = GroupModels::FromJson(j.at("models"));
  if (loaded.size() != models_.size()) {
    throw ConfigError("checkpoint: group count does not match configuration");
  }
  for (int i = 0; i < loaded.size(); ++i) {
    if (loaded.group(i).extractor.in_dim() !=
        models_.group(i).extractor.in_dim()) {
      throw ConfigError("checkpoint: extractor input dims do not match");
    }
  }
  encoder_.LoadEmbeddingsJson(j.at("encoder"));
  models_ = std::move(loaded);
}

bool operator==(const PassiveModel& a, const PassiveModel& b) {
  if (a.models_ != b.models_) return false;
  const auto& ea = a.encoder_.embeddings();
  const auto& eb = b.encoder_.embeddings();
  return ea == eb;
}

}  // namespace vflda::adversarial
