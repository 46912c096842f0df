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

// Tabular data: CSV ingestion against a declared schema, per-party column
// views, source/target domain splitting, positive-label subsampling and a
// synthetic covariate-shift generator.

#ifndef VFLDA_DATA_H_
#define VFLDA_DATA_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace vflda::data {

enum class ColumnKind { kNumeric, kCategorical };

// Which party holds a column. kNone marks bookkeeping columns (for example
// the domain indicator) that are never used as features.
enum class PartyRole { kActive, kPassive, kNone };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> vocab;  // categorical only
  PartyRole party = PartyRole::kPassive;
  int embedding_dim = 0;  // 0 selects nn::DefaultEmbeddingDim(vocab)
};

struct Schema {
  std::vector<ColumnSchema> columns;  // feature and bookkeeping columns
  std::string label_column;
  std::string positive_label = "1";

  static Schema FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

struct TabularDataset {
  std::vector<ColumnSchema> columns;
  // Column-major storage; `numeric[c]` is empty for categorical columns and
  // `codes[c]` is empty for numeric ones.
  std::vector<std::vector<double>> numeric;
  std::vector<std::vector<int>> codes;
  std::vector<int> labels;
  std::string label_column;

  std::size_t num_rows() const { return labels.size(); }
  // -1 when absent.
  int ColumnIndex(const std::string& name) const;
  int RequireColumn(const std::string& name) const;
  std::vector<int> PartyColumns(PartyRole role) const;
};

// Parses a UTF-8, comma-delimited CSV with a header row and RFC 4180 style
// quoting. Values are typed against `schema`; numerics are left raw (see
// Standardize). Errors name the offending row and column.
TabularDataset LoadCsv(const std::string& path, const Schema& schema);
TabularDataset ParseCsv(const std::string& text, const Schema& schema);
void WriteCsv(const TabularDataset& data, const std::string& path);

struct ColumnStats {
  std::string name;
  double mean = 0.0;
  double stddev = 1.0;
};

// Z-scores every numeric column in place using statistics computed on
// `fit_rows` only. Returns the statistics applied.
std::vector<ColumnStats> Standardize(TabularDataset& data,
                                     const std::vector<std::size_t>& fit_rows);

struct DomainSplit {
  std::vector<std::size_t> source;            // labeled source rows (D^s)
  std::vector<std::size_t> target_labeled;    // D^t_l
  std::vector<std::size_t> target_unlabeled;  // D^t_u
  std::vector<std::size_t> target_test;       // held-out evaluation rows

  // Every target row available to party C for adaptation.
  std::vector<std::size_t> TargetAll() const;
  nlohmann::json ToJson() const;
};

struct SplitConfig {
  std::string domain_column;
  std::vector<std::string> source_values;
  std::vector<std::string> target_values;
  std::size_t source_size = 0;  // 0 = all matching rows
  std::size_t target_labeled_size = 0;
  std::size_t target_unlabeled_size = 0;
  std::size_t target_test_size = 0;
  // Structural check n_source >= min_source_ratio * n_target_labeled.
  double min_source_ratio = 1.0;
  bool standardize = true;
  std::uint64_t seed = 0;

  static SplitConfig FromJson(const nlohmann::json& j);
};

// Partitions rows by the domain predicate; numerics are standardised with
// source statistics when requested.
DomainSplit SplitDomains(TabularDataset& data, const SplitConfig& config);

// Keeps exactly n_pos positives in target_labeled and enough negatives that
// the labeled set has round(n_pos / ratio) rows.
DomainSplit SubsamplePositives(const TabularDataset& data,
                               const DomainSplit& split, std::size_t n_pos,
                               double ratio, std::uint64_t seed);

// One party's columns over a set of aligned rows.
struct PartyView {
  PartyRole role = PartyRole::kActive;
  std::vector<std::size_t> alignment;  // dataset row ids, shared across views
  std::vector<int> columns;            // dataset column ids
  std::vector<std::vector<double>> numeric;  // [column][row]
  std::vector<std::vector<int>> codes;       // [column][row]
  std::vector<int> labels;  // active views only; empty for party C

  std::size_t num_rows() const { return alignment.size(); }
};

PartyView MakePartyView(const TabularDataset& data,
                        const std::vector<std::size_t>& rows, PartyRole role,
                        bool with_labels);

struct SynthConfig {
  int groups = 3;
  int features_per_group = 4;
  int categorical_per_group = 0;
  int categorical_vocab = 6;
  int active_features = 3;
  std::size_t source_size = 4000;
  std::size_t target_labeled_size = 400;
  std::size_t target_unlabeled_size = 900;
  std::size_t target_test_size = 2000;
  double shift = 2.0;             // target mean offset per group, in sigmas
  double label_noise = 0.05;      // probability of flipping a label
  double interaction_strength = 1.5;
  double group_strength = 1.0;
  double active_strength = 0.5;
  double intercept = -1.0;

  static SynthConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

struct SynthResult {
  TabularDataset dataset;
  Schema schema;
  DomainSplit split;
  // Group name -> column names, matching the generator's structure.
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
};

// Synthetic covariate shift: source party-C features are standard Gaussian,
// target features are shifted by `shift` along a per-group direction, and
// labels come from one fixed logistic ground truth with per-group
// nonlinear terms and pairwise cross-group interactions.
SynthResult SynthShift(const SynthConfig& config, std::uint64_t seed);

}  // namespace vflda::data

#endif  // VFLDA_DATA_H_
