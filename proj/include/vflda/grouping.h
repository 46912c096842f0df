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

// Feature grouping at the passive party: k expert-defined base groups plus
// the k(k-1)/2 pairwise interaction groups, and assembly of per-group input
// matrices (numeric columns as-is, categorical columns through embeddings).

#ifndef VFLDA_GROUPING_H_
#define VFLDA_GROUPING_H_

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vflda/data.h"
#include "vflda/nn.h"

namespace vflda::grouping {

struct FeatureGroup {
  std::string name;
  std::vector<std::string> columns;  // ordered
  // Base groups: empty. Interaction groups: the two parent base-group
  // indices (i < j).
  std::vector<int> parents;

  bool is_interaction() const { return !parents.empty(); }
};

using NamedColumns = std::vector<std::pair<std::string, std::vector<std::string>>>;

class FeatureGroupSpec {
 public:
  // Validates that `base_groups` partition `feature_columns` (when the latter
  // is non-empty) and appends interaction group (i, j) for every i < j when
  // `interactions_enabled`. Interaction columns are the concatenation of the
  // parents' columns.
  static FeatureGroupSpec Build(const NamedColumns& base_groups,
                                bool interactions_enabled,
                                const std::vector<std::string>& feature_columns = {});
  // One group holding every column, the layout used when feature grouping is
  // disabled.
  static FeatureGroupSpec SingleGroup(const std::vector<std::string>& columns,
                                      std::string name = "all_feat");

  int k() const { return k_; }
  int z() const { return g() - k_; }
  int g() const { return static_cast<int>(groups_.size()); }
  bool interactions_enabled() const { return interactions_; }
  const std::vector<FeatureGroup>& groups() const { return groups_; }
  const FeatureGroup& group(int i) const { return groups_.at(i); }

  static FeatureGroupSpec FromJson(const nlohmann::json& j,
                                   bool interactions_enabled,
                                   const std::vector<std::string>& feature_columns = {});
  nlohmann::json ToJson() const;

 private:
  int k_ = 0;
  bool interactions_ = false;
  std::vector<FeatureGroup> groups_;
};

// Expected group count: k + C(k, 2) with interactions, k without.
int ExpectedGroupCount(int k, bool interactions_enabled);

// One column's slice inside a group input row.
struct Segment {
  int view_column = 0;  // position inside PartyView::columns
  int offset = 0;
  int width = 0;
  bool categorical = false;
  int embedding = -1;  // index into the encoder's embedding tables
};

struct GroupedBatch {
  std::vector<nn::Matrix> inputs;  // per group: batch x group_input_dim
  // Categorical codes of the batch rows, per embedding table.
  std::vector<std::vector<int>> codes;

  std::size_t batch_size() const {
    return inputs.empty() ? 0 : static_cast<std::size_t>(inputs[0].rows());
  }
};

struct EmbeddingGrads {
  std::vector<nn::Matrix> tables;
};

// Party C's input pipeline: owns the embedding tables for its categorical
// columns and turns rows of its PartyView into GroupedBatches.
class GroupEncoder {
 public:
  GroupEncoder() = default;
  GroupEncoder(FeatureGroupSpec spec, const data::TabularDataset& schema_source,
               nn::Rng& rng);

  const FeatureGroupSpec& spec() const { return spec_; }
  std::vector<int> group_input_dims() const;
  const std::vector<nn::EmbeddingTable>& embeddings() const {
    return embeddings_;
  }
  std::vector<nn::EmbeddingTable>& mutable_embeddings() { return embeddings_; }

  // `rows` index into the view. An empty `rows` selects every row.
  GroupedBatch Assemble(const data::PartyView& view,
                        const std::vector<std::size_t>& rows) const;

  EmbeddingGrads ZeroGrads() const;
  // Scatters d loss / d group-input into embedding gradients.
  void AccumulateEmbeddingGrads(const GroupedBatch& batch,
                                const std::vector<nn::Matrix>& input_grads,
                                EmbeddingGrads* grads) const;
  void SgdStep(const EmbeddingGrads& grads, double eta);

  nlohmann::json ToJson() const;
  void LoadEmbeddingsJson(const nlohmann::json& j);

 private:
  FeatureGroupSpec spec_;
  std::vector<std::string> view_column_names_;  // passive columns, view order
  std::vector<nn::EmbeddingTable> embeddings_;
  std::vector<int> embedding_view_column_;
  std::vector<std::vector<Segment>> layout_;  // per group
};

}  // namespace vflda::grouping

#endif  // VFLDA_GROUPING_H_
