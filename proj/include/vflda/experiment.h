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

// One experiment config file drives every subcommand: data source, schema,
// domain split, feature groups, architectures and the run settings.

#ifndef VFLDA_EXPERIMENT_H_
#define VFLDA_EXPERIMENT_H_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vflda/adversarial.h"
#include "vflda/data.h"
#include "vflda/grouping.h"
#include "vflda/protocol.h"

namespace vflda::experiment {

enum class Variant { kPrada, kNoIr, kNoFgIr, kNoDaFgIr };

Variant ParseVariant(std::string_view name);
std::string_view VariantName(Variant v);
std::vector<Variant> ParseVariantList(std::string_view csv);

struct Experiment {
  std::string origin;  // config path, for error messages
  nlohmann::json config;
  data::TabularDataset data;
  data::DomainSplit split;
  grouping::NamedColumns base_groups;
  bool interactions = true;
  bool feature_grouping = true;
  grouping::FeatureGroupSpec spec;
  adversarial::ArchitectureConfig arch;
  protocol::RunConfig run;
  std::vector<data::ColumnStats> standardization;

  std::vector<std::string> PassiveColumns() const;
};

// Throws ConfigError naming `origin` and the offending field.
Experiment FromJson(const nlohmann::json& j, const std::string& origin,
                    const std::string& base_dir = ".");
Experiment Load(const std::string& path);

// Rebuilds the group spec and the adaptation switch for an ablation rung.
Experiment ApplyVariant(const Experiment& e, Variant v);

// Stable hash of a JSON document's canonical dump (FNV-1a, hex).
std::string ConfigHash(const nlohmann::json& j);

}  // namespace vflda::experiment

#endif  // VFLDA_EXPERIMENT_H_
