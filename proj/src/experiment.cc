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

#include "vflda/experiment.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vflda/errors.h"

namespace vflda::experiment {
namespace {

using nlohmann::json;

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

void LoadData(Experiment& e, const json& d, const std::string& base_dir) {
  if (d.contains("synth")) {
    const json& s = d["synth"];
    const data::SynthConfig sc = data::SynthConfig::FromJson(s);
    data::SynthResult r = data::SynthShift(sc, s.value("seed", std::uint64_t{0}));
    e.data = std::move(r.dataset);
    e.split = std::move(r.split);
    e.base_groups = std::move(r.groups);
  } else if (d.contains("csv")) {
    std::filesystem::path path = d["csv"].get<std::string>();
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    if (!d.contains("schema")) throw ConfigError("data.schema: required with data.csv");
    if (!d.contains("split")) throw ConfigError("data.split: required with data.csv");
    const data::Schema schema = data::Schema::FromJson(d["schema"]);
    e.data = data::LoadCsv(path.string(), schema);
    e.split = data::SplitDomains(e.data, data::SplitConfig::FromJson(d["split"]));
  } else {
    throw ConfigError("data: expected a 'synth' or 'csv' section");
  }
  if (d.contains("subsample")) {
    const json& s = d["subsample"];
    e.split = data::SubsamplePositives(
        e.data, e.split, s.at("n_pos").get<std::size_t>(),
        s.at("ratio").get<double>(), s.value("seed", std::uint64_t{0}));
  }
}

}  // namespace

Variant ParseVariant(std::string_view name) {
  const std::string n = Trim(name);
  if (n == "prada") return Variant::kPrada;
  if (n == "no_ir") return Variant::kNoIr;
  if (n == "no_fg_ir") return Variant::kNoFgIr;
  if (n == "no_da_fg_ir") return Variant::kNoDaFgIr;
  throw ConfigError("unknown variant '" + n +
                    "' (expected prada, no_ir, no_fg_ir or no_da_fg_ir)");
}

std::string_view VariantName(Variant v) {
  switch (v) {
    case Variant::kPrada:
      return "prada";
    case Variant::kNoIr:
      return "no_ir";
    case Variant::kNoFgIr:
      return "no_fg_ir";
    case Variant::kNoDaFgIr:
      return "no_da_fg_ir";
  }
  return "?";
}

std::vector<Variant> ParseVariantList(std::string_view csv) {
  std::vector<Variant> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    out.push_back(ParseVariant(csv.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

std::vector<std::string> Experiment::PassiveColumns() const {
  std::vector<std::string> cols;
  for (int c : data.PartyColumns(data::PartyRole::kPassive)) {
    cols.push_back(data.columns[c].name);
  }
  return cols;
}

Experiment FromJson(const json& j, const std::string& origin,
                    const std::string& base_dir) {
  Experiment e;
  e.origin = origin;
  e.config = j;
  std::string field = "(root)";
  try {
    if (!j.is_object()) throw ConfigError("expected a JSON object");
    field = "data";
    LoadData(e, j.at("data"), base_dir);
    field = "interactions";
    e.interactions = j.value("interactions", true);
    field = "feature_grouping";
    e.feature_grouping = j.value("feature_grouping", true);
    field = "groups";
    if (j.contains("groups")) {
      e.base_groups.clear();
      for (const auto& g : j["groups"]) {
        e.base_groups.emplace_back(g.at("name").get<std::string>(),
                                   g.at("columns").get<std::vector<std::string>>());
      }
    }
    if (e.base_groups.empty()) throw ConfigError("no feature groups defined");
    field = "architecture";
    if (j.contains("architecture")) {
      e.arch = adversarial::ArchitectureConfig::FromJson(j["architecture"]);
    }
    field = "run";
    e.run = protocol::RunConfig::FromJson(j.value("run", json::object()));
    field = "groups";
    e.spec = e.feature_grouping
                 ? grouping::FeatureGroupSpec::Build(e.base_groups, e.interactions,
                                                     e.PassiveColumns())
                 : grouping::FeatureGroupSpec::SingleGroup(e.PassiveColumns());
  } catch (const ConfigError& err) {
    throw ConfigError(origin + ": " + field + ": " + err.what());
  } catch (const json::exception& err) {
    throw ConfigError(origin + ": " + field + ": " + err.what());
  } catch (const DimensionError& err) {
    throw ConfigError(origin + ": " + field + ": " + err.what());
  }
  return e;
}

Experiment Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& err) {
    throw ConfigError(path + ": " + err.what());
  }
  const std::string dir =
      std::filesystem::path(path).parent_path().string();
  return FromJson(j, path, dir.empty() ? "." : dir);
}

Experiment ApplyVariant(const Experiment& e, Variant v) {
  Experiment out = e;
  const auto cols = e.PassiveColumns();
  switch (v) {
    case Variant::kPrada:
      out.interactions = true;
      out.feature_grouping = true;
      out.run.domain_adaptation = true;
      out.spec = grouping::FeatureGroupSpec::Build(e.base_groups, true, cols);
      break;
    case Variant::kNoIr:
      out.interactions = false;
      out.feature_grouping = true;
      out.run.domain_adaptation = true;
      out.spec = grouping::FeatureGroupSpec::Build(e.base_groups, false, cols);
      break;
    case Variant::kNoFgIr:
      out.interactions = false;
      out.feature_grouping = false;
      out.run.domain_adaptation = true;
      out.spec = grouping::FeatureGroupSpec::SingleGroup(cols);
      break;
    case Variant::kNoDaFgIr:
      out.interactions = false;
      out.feature_grouping = false;
      out.run.domain_adaptation = false;
      out.spec = grouping::FeatureGroupSpec::SingleGroup(cols);
      break;
  }
  return out;
}

std::string ConfigHash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vflda::experiment
