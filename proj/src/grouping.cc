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

#include "vflda/grouping.h"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "vflda/errors.h"

namespace vflda::grouping {

int ExpectedGroupCount(int k, bool interactions_enabled) {
  return interactions_enabled ? k + k * (k - 1) / 2 : k;
}

FeatureGroupSpec FeatureGroupSpec::Build(
    const NamedColumns& base_groups, bool interactions_enabled,
    const std::vector<std::string>& feature_columns) {
  if (base_groups.empty()) throw ConfigError("groups: at least one group required");
  FeatureGroupSpec spec;
  spec.k_ = static_cast<int>(base_groups.size());
  spec.interactions_ = interactions_enabled;
  std::unordered_set<std::string> seen;
  std::unordered_set<std::string> names;
  for (const auto& [name, cols] : base_groups) {
    if (cols.empty()) throw ConfigError("groups." + name + ": empty column list");
    if (!names.insert(name).second) {
      throw ConfigError("groups: duplicate group name '" + name + "'");
    }
    for (const auto& c : cols) {
      if (!seen.insert(c).second) {
        throw ConfigError("groups." + name + ": column '" + c +
                          "' already belongs to another group");
      }
    }
    spec.groups_.push_back({name, cols, {}});
  }
  if (!feature_columns.empty()) {
    std::unordered_set<std::string> universe(feature_columns.begin(),
                                             feature_columns.end());
    for (const auto& c : seen) {
      if (!universe.count(c)) {
        throw ConfigError("groups: column '" + c +
                          "' is not a passive-party feature");
      }
    }
    for (const auto& c : feature_columns) {
      if (!seen.count(c)) {
        throw ConfigError("groups: passive-party column '" + c +
                          "' is not assigned to any group");
      }
    }
  }
  if (interactions_enabled) {
    for (int i = 0; i < spec.k_; ++i) {
      for (int j = i + 1; j < spec.k_; ++j) {
        FeatureGroup g;
        g.name = spec.groups_[i].name + "-" + spec.groups_[j].name;
        g.columns = spec.groups_[i].columns;
        g.columns.insert(g.columns.end(), spec.groups_[j].columns.begin(),
                         spec.groups_[j].columns.end());
        g.parents = {i, j};
        spec.groups_.push_back(std::move(g));
      }
    }
  }
  return spec;
}

FeatureGroupSpec FeatureGroupSpec::SingleGroup(
    const std::vector<std::string>& columns, std::string name) {
  return Build({{std::move(name), columns}}, false, columns);
}

FeatureGroupSpec FeatureGroupSpec::FromJson(
    const nlohmann::json& j, bool interactions_enabled,
    const std::vector<std::string>& feature_columns) {
  if (!j.is_array()) {
    throw ConfigError("groups: expected an array of {name, columns}");
  }
  NamedColumns base;
  for (const auto& gj : j) {
    base.emplace_back(gj.at("name").get<std::string>(),
                      gj.at("columns").get<std::vector<std::string>>());
  }
  return Build(base, interactions_enabled, feature_columns);
}

nlohmann::json FeatureGroupSpec::ToJson() const {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < k_; ++i) {
    arr.push_back({{"name", groups_[i].name}, {"columns", groups_[i].columns}});
  }
  return arr;
}

GroupEncoder::GroupEncoder(FeatureGroupSpec spec,
                           const data::TabularDataset& schema_source,
                           nn::Rng& rng)
    : spec_(std::move(spec)) {
  const auto passive = schema_source.PartyColumns(data::PartyRole::kPassive);
  std::unordered_map<std::string, int> view_pos;
  for (std::size_t i = 0; i < passive.size(); ++i) {
    view_column_names_.push_back(schema_source.columns[passive[i]].name);
    view_pos[view_column_names_.back()] = static_cast<int>(i);
  }
  std::unordered_map<int, int> embedding_of;  // view column -> table
  // Tables are created in base-group order so that initialisation does not
  // depend on whether interaction groups exist.
  for (const auto& group : spec_.groups()) {
    std::vector<Segment> segments;
    int offset = 0;
    for (const auto& name : group.columns) {
      auto it = view_pos.find(name);
      if (it == view_pos.end()) {
        throw ConfigError("groups." + group.name + ": column '" + name +
                          "' is not held by the passive party");
      }
      const auto& col = schema_source.columns[passive[it->second]];
      Segment seg;
      seg.view_column = it->second;
      seg.offset = offset;
      if (col.kind == data::ColumnKind::kCategorical) {
        seg.categorical = true;
        auto e = embedding_of.find(seg.view_column);
        if (e == embedding_of.end()) {
          const int vocab = static_cast<int>(col.vocab.size());
          const int dim = col.embedding_dim > 0 ? col.embedding_dim
                                                : nn::DefaultEmbeddingDim(vocab);
          embeddings_.emplace_back(vocab, dim, rng);
          embedding_view_column_.push_back(seg.view_column);
          e = embedding_of.emplace(seg.view_column,
                                   static_cast<int>(embeddings_.size()) - 1)
                  .first;
        }
        seg.embedding = e->second;
        seg.width = embeddings_[seg.embedding].dim();
      } else {
        seg.width = 1;
      }
      offset += seg.width;
      segments.push_back(seg);
    }
    layout_.push_back(std::move(segments));
  }
}

std::vector<int> GroupEncoder::group_input_dims() const {
  std::vector<int> dims;
  for (const auto& segs : layout_) {
    int d = 0;
    for (const auto& s : segs) d += s.width;
    dims.push_back(d);
  }
  return dims;
}

GroupedBatch GroupEncoder::Assemble(const data::PartyView& view,
                                    const std::vector<std::size_t>& rows) const {
  if (view.role != data::PartyRole::kPassive) {
    throw ConfigError("assemble: expected the passive party's view");
  }
  if (view.columns.size() != view_column_names_.size()) {
    throw DimensionError("assemble: view does not match the encoder's schema");
  }
  std::vector<std::size_t> all;
  const std::vector<std::size_t>* sel = &rows;
  if (rows.empty()) {
    all.resize(view.num_rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    sel = &all;
  }
  const auto n = static_cast<Eigen::Index>(sel->size());
  GroupedBatch batch;
  batch.codes.resize(embeddings_.size());
  std::vector<nn::Matrix> looked_up(embeddings_.size());
  for (std::size_t e = 0; e < embeddings_.size(); ++e) {
    const auto& src = view.codes[embedding_view_column_[e]];
    auto& codes = batch.codes[e];
    codes.reserve(sel->size());
    for (auto r : *sel) {
      if (r >= view.num_rows()) throw DimensionError("assemble: row out of range");
      codes.push_back(src[r]);
    }
    looked_up[e] = embeddings_[e].Lookup(codes);
  }
  const auto dims = group_input_dims();
  for (std::size_t g = 0; g < layout_.size(); ++g) {
    nn::Matrix x(n, dims[g]);
    for (const auto& seg : layout_[g]) {
      if (seg.categorical) {
        x.block(0, seg.offset, n, seg.width) = looked_up[seg.embedding];
      } else {
        const auto& col = view.numeric[seg.view_column];
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto r = (*sel)[i];
          if (r >= col.size()) throw DimensionError("assemble: row out of range");
          x(i, seg.offset) = col[r];
        }
      }
    }
    batch.inputs.push_back(std::move(x));
  }
  return batch;
}

EmbeddingGrads GroupEncoder::ZeroGrads() const {
  EmbeddingGrads g;
  for (const auto& t : embeddings_) {
    g.tables.push_back(nn::Matrix::Zero(t.vocab(), t.dim()));
  }
  return g;
}

void GroupEncoder::AccumulateEmbeddingGrads(
    const GroupedBatch& batch, const std::vector<nn::Matrix>& input_grads,
    EmbeddingGrads* grads) const {
  if (input_grads.size() != layout_.size()) {
    throw DimensionError("embedding grads: one input gradient per group needed");
  }
  if (grads->tables.size() != embeddings_.size()) *grads = ZeroGrads();
  for (std::size_t g = 0; g < layout_.size(); ++g) {
    for (const auto& seg : layout_[g]) {
      if (!seg.categorical) continue;
      const nn::Matrix slice =
          input_grads[g].block(0, seg.offset, input_grads[g].rows(), seg.width);
      embeddings_[seg.embedding].AccumulateGrad(
          batch.codes[seg.embedding], slice, &grads->tables[seg.embedding]);
    }
  }
}

void GroupEncoder::SgdStep(const EmbeddingGrads& grads, double eta) {
  if (grads.tables.size() != embeddings_.size()) {
    throw DimensionError("embedding sgd: table count mismatch");
  }
  for (std::size_t e = 0; e < embeddings_.size(); ++e) {
    embeddings_[e].SgdStep(grads.tables[e], eta);
  }
}

nlohmann::json GroupEncoder::ToJson() const {
  nlohmann::json tables = nlohmann::json::array();
  for (std::size_t e = 0; e < embeddings_.size(); ++e) {
    tables.push_back({{"column", view_column_names_[embedding_view_column_[e]]},
                      {"table", nn::MatrixToJson(embeddings_[e].table())}});
  }
  return {{"groups", spec_.ToJson()},
          {"interactions", spec_.interactions_enabled()},
          {"embeddings", tables}};
}

void GroupEncoder::LoadEmbeddingsJson(const nlohmann::json& j) {
  const auto& tables = j.at("embeddings");
  if (tables.size() != embeddings_.size()) {
    throw ConfigError("checkpoint: embedding table count mismatch");
  }
  for (std::size_t e = 0; e < embeddings_.size(); ++e) {
    nn::Matrix t = nn::MatrixFromJson(tables[e].at("table"));
    if (t.rows() != embeddings_[e].vocab() || t.cols() != embeddings_[e].dim()) {
      throw ConfigError("checkpoint: embedding table shape mismatch");
    }
    embeddings_[e] = nn::EmbeddingTable(std::move(t));
  }
}

}  // namespace vflda::grouping
