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

#include "vflda/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vflda/errors.h"

namespace vflda::data {
namespace {

std::string PartyName(PartyRole r) {
  switch (r) {
    case PartyRole::kActive:
      return "active";
    case PartyRole::kPassive:
      return "passive";
    case PartyRole::kNone:
      return "none";
  }
  return "none";
}

PartyRole ParseParty(const std::string& s) {
  if (s == "active") return PartyRole::kActive;
  if (s == "passive") return PartyRole::kPassive;
  if (s == "none") return PartyRole::kNone;
  throw ConfigError("schema: unknown party '" + s + "'");
}

// Splits CSV text into records of fields.
std::vector<std::vector<std::string>> ParseRecords(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !record.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        record.clear();
        field.clear();
        field_started = false;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw ConfigError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string QuoteCsv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <typename T>
void Shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  // Fisher-Yates with an explicit draw so results do not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

std::size_t TakeOrAll(std::size_t requested, std::size_t available,
                      const char* what) {
  if (requested == 0) return available;
  if (requested > available) {
    throw ConfigError(std::string("split: requested ") +
                      std::to_string(requested) + " " + what + " rows but " +
                      std::to_string(available) + " are available");
  }
  return requested;
}

}  // namespace

Schema Schema::FromJson(const nlohmann::json& j) {
  Schema s;
  if (!j.contains("label") || !j["label"].is_string()) {
    throw ConfigError("schema.label: required string");
  }
  s.label_column = j["label"];
  s.positive_label = j.value("positive_label", "1");
  if (!j.contains("columns") || !j["columns"].is_array()) {
    throw ConfigError("schema.columns: required array");
  }
  std::unordered_set<std::string> seen;
  for (const auto& cj : j["columns"]) {
    ColumnSchema c;
    c.name = cj.at("name").get<std::string>();
    if (!seen.insert(c.name).second) {
      throw ConfigError("schema.columns: duplicate column '" + c.name + "'");
    }
    const std::string kind = cj.value("kind", "numeric");
    if (kind == "numeric") {
      c.kind = ColumnKind::kNumeric;
    } else if (kind == "categorical") {
      c.kind = ColumnKind::kCategorical;
      if (cj.contains("vocab")) {
        c.vocab = cj["vocab"].get<std::vector<std::string>>();
      } else {
        const int size = cj.value("vocab_size", 0);
        for (int v = 0; v < size; ++v) c.vocab.push_back(std::to_string(v));
      }
      if (c.vocab.empty()) {
        throw ConfigError("schema.columns." + c.name + ".vocab: empty");
      }
    } else {
      throw ConfigError("schema.columns." + c.name + ".kind: unknown '" +
                        kind + "'");
    }
    c.party = ParseParty(cj.value("party", "passive"));
    c.embedding_dim = cj.value("embedding_dim", 0);
    s.columns.push_back(std::move(c));
  }
  return s;
}

nlohmann::json Schema::ToJson() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json cj = {{"name", c.name},
                         {"kind", c.kind == ColumnKind::kNumeric
                                      ? "numeric"
                                      : "categorical"},
                         {"party", PartyName(c.party)}};
    if (c.kind == ColumnKind::kCategorical) cj["vocab"] = c.vocab;
    if (c.embedding_dim > 0) cj["embedding_dim"] = c.embedding_dim;
    cols.push_back(std::move(cj));
  }
  return {{"label", label_column},
          {"positive_label", positive_label},
          {"columns", cols}};
}

int TabularDataset::ColumnIndex(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int TabularDataset::RequireColumn(const std::string& name) const {
  const int i = ColumnIndex(name);
  if (i < 0) throw ConfigError("unknown column '" + name + "'");
  return i;
}

std::vector<int> TabularDataset::PartyColumns(PartyRole role) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].party == role) out.push_back(static_cast<int>(i));
  }
  return out;
}

TabularDataset ParseCsv(const std::string& text, const Schema& schema) {
  auto records = ParseRecords(text);
  if (records.empty()) throw ConfigError("csv: missing header row");
  const auto& header = records.front();
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    position[Trim(header[i])] = i;
  }
  for (const auto& name : header) {
    const std::string n = Trim(name);
    const bool known =
        n == schema.label_column ||
        std::any_of(schema.columns.begin(), schema.columns.end(),
                    [&](const ColumnSchema& c) { return c.name == n; });
    if (!known) throw ConfigError("csv: unknown column '" + n + "'");
  }
  auto find = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) {
      throw ConfigError("csv: schema column '" + name +
                        "' missing from header");
    }
    return it->second;
  };

  TabularDataset data;
  data.columns = schema.columns;
  data.label_column = schema.label_column;
  data.numeric.resize(schema.columns.size());
  data.codes.resize(schema.columns.size());
  const std::size_t label_pos = find(schema.label_column);
  std::vector<std::size_t> col_pos;
  std::vector<std::unordered_map<std::string, int>> vocab_index(
      schema.columns.size());
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    col_pos.push_back(find(schema.columns[c].name));
    for (std::size_t v = 0; v < schema.columns[c].vocab.size(); ++v) {
      vocab_index[c][schema.columns[c].vocab[v]] = static_cast<int>(v);
    }
  }

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r + 1);
    if (rec.size() != header.size()) {
      throw ConfigError("csv: " + where + " has " + std::to_string(rec.size()) +
                        " fields, header has " +
                        std::to_string(header.size()));
    }
    const std::string label = Trim(rec[label_pos]);
    if (label == schema.positive_label) {
      data.labels.push_back(1);
    } else if (schema.positive_label != "1" || label == "0") {
      data.labels.push_back(0);
    } else {
      throw ConfigError("csv: " + where + ", column '" + schema.label_column +
                        "': label '" + label + "' is not 0/1");
    }
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto& col = schema.columns[c];
      const std::string cell = Trim(rec[col_pos[c]]);
      if (col.kind == ColumnKind::kCategorical) {
        auto it = vocab_index[c].find(cell);
        if (it == vocab_index[c].end()) {
          throw ConfigError("csv: " + where + ", column '" + col.name +
                            "': category '" + cell + "' not in vocabulary");
        }
        data.codes[c].push_back(it->second);
      } else {
        std::size_t used = 0;
        double v = 0;
        try {
          v = std::stod(cell, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (cell.empty() || used != cell.size() || !std::isfinite(v)) {
          throw ConfigError("csv: " + where + ", column '" + col.name +
                            "': cannot parse '" + cell + "' as a number");
        }
        data.numeric[c].push_back(v);
      }
    }
  }
  return data;
}

TabularDataset LoadCsv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open csv file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseCsv(buf.str(), schema);
}

void WriteCsv(const TabularDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write csv file '" + path + "'");
  for (const auto& c : data.columns) out << QuoteCsv(c.name) << ",";
  out << QuoteCsv(data.label_column) << "\n";
  out << std::setprecision(17);
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    for (std::size_t c = 0; c < data.columns.size(); ++c) {
      if (data.columns[c].kind == ColumnKind::kCategorical) {
        out << QuoteCsv(data.columns[c].vocab[data.codes[c][r]]);
      } else {
        out << data.numeric[c][r];
      }
      out << ",";
    }
    out << data.labels[r] << "\n";
  }
}

std::vector<ColumnStats> Standardize(TabularDataset& data,
                                     const std::vector<std::size_t>& fit_rows) {
  if (fit_rows.empty()) throw ConfigError("standardize: no rows to fit on");
  std::vector<ColumnStats> stats;
  for (std::size_t c = 0; c < data.columns.size(); ++c) {
    if (data.columns[c].kind != ColumnKind::kNumeric) continue;
    auto& col = data.numeric[c];
    double mean = 0;
    for (auto r : fit_rows) mean += col[r];
    mean /= fit_rows.size();
    double var = 0;
    for (auto r : fit_rows) var += (col[r] - mean) * (col[r] - mean);
    var /= fit_rows.size();
    const double sd = var > 0 ? std::sqrt(var) : 1.0;
    for (double& v : col) v = (v - mean) / sd;
    stats.push_back({data.columns[c].name, mean, sd});
  }
  return stats;
}

std::vector<std::size_t> DomainSplit::TargetAll() const {
  std::vector<std::size_t> out = target_labeled;
  out.insert(out.end(), target_unlabeled.begin(), target_unlabeled.end());
  return out;
}

nlohmann::json DomainSplit::ToJson() const {
  return {{"source", source.size()},
          {"target_labeled", target_labeled.size()},
          {"target_unlabeled", target_unlabeled.size()},
          {"target_test", target_test.size()}};
}

SplitConfig SplitConfig::FromJson(const nlohmann::json& j) {
  SplitConfig s;
  s.domain_column = j.at("domain_column").get<std::string>();
  s.source_values = j.at("source_values").get<std::vector<std::string>>();
  s.target_values = j.at("target_values").get<std::vector<std::string>>();
  s.source_size = j.value("source_size", std::size_t{0});
  s.target_labeled_size = j.value("target_labeled_size", std::size_t{0});
  s.target_unlabeled_size = j.value("target_unlabeled_size", std::size_t{0});
  s.target_test_size = j.value("target_test_size", std::size_t{0});
  s.min_source_ratio = j.value("min_source_ratio", 1.0);
  s.standardize = j.value("standardize", true);
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

DomainSplit SplitDomains(TabularDataset& data, const SplitConfig& config) {
  const int col = data.RequireColumn(config.domain_column);
  const auto& schema = data.columns[col];
  auto matches = [&](std::size_t row, const std::vector<std::string>& values) {
    std::string v;
    if (schema.kind == ColumnKind::kCategorical) {
      v = schema.vocab[data.codes[col][row]];
    } else {
      std::ostringstream os;
      os << data.numeric[col][row];
      v = os.str();
    }
    return std::find(values.begin(), values.end(), v) != values.end();
  };
  std::vector<std::size_t> source, target;
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    if (matches(r, config.source_values)) {
      source.push_back(r);
    } else if (matches(r, config.target_values)) {
      target.push_back(r);
    }
  }
  if (source.empty()) throw ConfigError("split: source predicate matches nothing");
  if (target.empty()) throw ConfigError("split: target predicate matches nothing");

  std::mt19937_64 rng(config.seed);
  Shuffle(source, rng);
  Shuffle(target, rng);

  DomainSplit split;
  const std::size_t ns = TakeOrAll(config.source_size, source.size(), "source");
  split.source.assign(source.begin(), source.begin() + ns);

  const std::size_t nl = config.target_labeled_size;
  const std::size_t nu = config.target_unlabeled_size;
  const std::size_t nt = config.target_test_size;
  if (nl + nu + nt > target.size()) {
    throw ConfigError("split: requested " + std::to_string(nl + nu + nt) +
                      " target rows but " + std::to_string(target.size()) +
                      " are available");
  }
  auto it = target.begin();
  split.target_labeled.assign(it, it + nl);
  it += nl;
  split.target_unlabeled.assign(it, it + nu);
  it += nu;
  split.target_test.assign(it, it + nt);

  if (static_cast<double>(split.source.size()) <
      config.min_source_ratio * static_cast<double>(split.target_labeled.size())) {
    throw ConfigError("split: source has " +
                      std::to_string(split.source.size()) +
                      " rows, fewer than min_source_ratio x target labeled");
  }
  if (config.standardize) Standardize(data, split.source);
  return split;
}

DomainSplit SubsamplePositives(const TabularDataset& data,
                               const DomainSplit& split, std::size_t n_pos,
                               double ratio, std::uint64_t seed) {
  if (!(ratio > 0 && ratio <= 1)) {
    throw ConfigError("subsample: ratio must lie in (0, 1]");
  }
  std::vector<std::size_t> pos, neg;
  for (auto r : split.target_labeled) {
    (data.labels[r] == 1 ? pos : neg).push_back(r);
  }
  if (n_pos > pos.size()) {
    throw ConfigError("subsample: requested " + std::to_string(n_pos) +
                      " positives, only " + std::to_string(pos.size()) +
                      " available");
  }
  const auto total = static_cast<std::size_t>(std::llround(n_pos / ratio));
  const std::size_t n_neg = total - n_pos;
  if (n_neg > neg.size()) {
    throw ConfigError("subsample: need " + std::to_string(n_neg) +
                      " negatives, only " + std::to_string(neg.size()) +
                      " available");
  }
  DomainSplit out = split;
  if (n_pos == pos.size() && n_neg == neg.size()) return out;
  std::mt19937_64 rng(seed);
  Shuffle(pos, rng);
  Shuffle(neg, rng);
  std::unordered_set<std::size_t> keep(pos.begin(), pos.begin() + n_pos);
  keep.insert(neg.begin(), neg.begin() + n_neg);
  out.target_labeled.clear();
  for (auto r : split.target_labeled) {
    if (keep.count(r)) out.target_labeled.push_back(r);
  }
  return out;
}

PartyView MakePartyView(const TabularDataset& data,
                        const std::vector<std::size_t>& rows, PartyRole role,
                        bool with_labels) {
  PartyView view;
  view.role = role;
  view.alignment = rows;
  view.columns = data.PartyColumns(role);
  for (int c : view.columns) {
    std::vector<double> num;
    std::vector<int> cod;
    if (data.columns[c].kind == ColumnKind::kNumeric) {
      num.reserve(rows.size());
      for (auto r : rows) num.push_back(data.numeric[c][r]);
    } else {
      cod.reserve(rows.size());
      for (auto r : rows) cod.push_back(data.codes[c][r]);
    }
    view.numeric.push_back(std::move(num));
    view.codes.push_back(std::move(cod));
  }
  if (with_labels) {
    if (role != PartyRole::kActive) {
      throw ConfigError("labels may only be attached to an active party view");
    }
    for (auto r : rows) view.labels.push_back(data.labels[r]);
  }
  return view;
}

SynthConfig SynthConfig::FromJson(const nlohmann::json& j) {
  SynthConfig c;
  c.groups = j.value("groups", c.groups);
  c.features_per_group = j.value("features_per_group", c.features_per_group);
  c.categorical_per_group =
      j.value("categorical_per_group", c.categorical_per_group);
  c.categorical_vocab = j.value("categorical_vocab", c.categorical_vocab);
  c.active_features = j.value("active_features", c.active_features);
  c.source_size = j.value("source_size", c.source_size);
  c.target_labeled_size = j.value("target_labeled_size", c.target_labeled_size);
  c.target_unlabeled_size =
      j.value("target_unlabeled_size", c.target_unlabeled_size);
  c.target_test_size = j.value("target_test_size", c.target_test_size);
  c.shift = j.value("shift", c.shift);
  c.label_noise = j.value("label_noise", c.label_noise);
  c.interaction_strength =
      j.value("interaction_strength", c.interaction_strength);
  c.group_strength = j.value("group_strength", c.group_strength);
  c.active_strength = j.value("active_strength", c.active_strength);
  c.intercept = j.value("intercept", c.intercept);
  return c;
}

nlohmann::json SynthConfig::ToJson() const {
  return {{"groups", groups},
          {"features_per_group", features_per_group},
          {"categorical_per_group", categorical_per_group},
          {"categorical_vocab", categorical_vocab},
          {"active_features", active_features},
          {"source_size", source_size},
          {"target_labeled_size", target_labeled_size},
          {"target_unlabeled_size", target_unlabeled_size},
          {"target_test_size", target_test_size},
          {"shift", shift},
          {"label_noise", label_noise},
          {"interaction_strength", interaction_strength},
          {"group_strength", group_strength},
          {"active_strength", active_strength},
          {"intercept", intercept}};
}

SynthResult SynthShift(const SynthConfig& config, std::uint64_t seed) {
  if (config.groups < 1 || config.features_per_group < 0 ||
      config.categorical_per_group < 0 ||
      config.features_per_group + config.categorical_per_group < 1 ||
      config.active_features < 0 || config.source_size == 0 ||
      (config.categorical_per_group > 0 && config.categorical_vocab < 2) ||
      config.label_noise < 0 || config.label_noise >= 0.5) {
    throw ConfigError("synth: invalid dimensions or rates");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int k = config.groups;
  const int latent = config.features_per_group + config.categorical_per_group;
  auto unit_vector = [&](int d) {
    std::vector<double> v(d);
    double norm = 0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  };

  // Ground truth, drawn once from the seed.
  std::vector<std::vector<double>> u(k), v(k), dir(k);
  for (int i = 0; i < k; ++i) {
    u[i] = unit_vector(latent);
    v[i] = unit_vector(latent);
    dir[i] = unit_vector(latent);
  }
  std::vector<double> active_w(config.active_features);
  for (double& w : active_w) w = normal(rng);
  const int pairs = k * (k - 1) / 2;

  SynthResult out;
  Schema& schema = out.schema;
  schema.label_column = "label";
  for (int i = 0; i < k; ++i) {
    std::vector<std::string> names;
    for (int f = 0; f < config.features_per_group; ++f) {
      ColumnSchema c;
      c.name = "g" + std::to_string(i) + "_x" + std::to_string(f);
      c.party = PartyRole::kPassive;
      names.push_back(c.name);
      schema.columns.push_back(c);
    }
    for (int f = 0; f < config.categorical_per_group; ++f) {
      ColumnSchema c;
      c.name = "g" + std::to_string(i) + "_c" + std::to_string(f);
      c.kind = ColumnKind::kCategorical;
      for (int t = 0; t < config.categorical_vocab; ++t)
        c.vocab.push_back("v" + std::to_string(t));
      c.party = PartyRole::kPassive;
      names.push_back(c.name);
      schema.columns.push_back(c);
    }
    out.groups.emplace_back("group" + std::to_string(i), std::move(names));
  }
  for (int f = 0; f < config.active_features; ++f) {
    ColumnSchema c;
    c.name = "a_x" + std::to_string(f);
    c.party = PartyRole::kActive;
    schema.columns.push_back(c);
  }
  {
    ColumnSchema c;
    c.name = "domain";
    c.kind = ColumnKind::kCategorical;
    c.vocab = {"source", "target"};
    c.party = PartyRole::kNone;
    schema.columns.push_back(c);
  }

  TabularDataset& data = out.dataset;
  data.columns = schema.columns;
  data.label_column = schema.label_column;
  data.numeric.resize(schema.columns.size());
  data.codes.resize(schema.columns.size());
  const int domain_col = static_cast<int>(schema.columns.size()) - 1;
  const int active_col0 = k * latent;

  const std::size_t n_target = config.target_labeled_size +
                               config.target_unlabeled_size +
                               config.target_test_size;
  const std::size_t n = config.source_size + n_target;
  for (std::size_t r = 0; r < n; ++r) {
    const bool target = r >= config.source_size;
    double logit = config.intercept;
    std::vector<double> proj_v(k);
    for (int i = 0; i < k; ++i) {
      std::vector<double> z(latent);
      for (int d = 0; d < latent; ++d) {
        z[d] = normal(rng) + (target ? config.shift * dir[i][d] : 0.0);
      }
      double pu = 0, pv = 0;
      for (int d = 0; d < latent; ++d) {
        pu += u[i][d] * z[d];
        pv += v[i][d] * z[d];
      }
      logit += config.group_strength * std::tanh(pu);
      proj_v[i] = pv;
      for (int f = 0; f < config.features_per_group; ++f) {
        data.numeric[i * latent + f].push_back(z[f]);
      }
      for (int f = 0; f < config.categorical_per_group; ++f) {
        const double zc = z[config.features_per_group + f];
        const int vocab = config.categorical_vocab;
        int code = static_cast<int>(std::floor((zc + 3.0) / 6.0 * vocab));
        code = std::clamp(code, 0, vocab - 1);
        data.codes[i * latent + config.features_per_group + f].push_back(code);
      }
    }
    if (pairs > 0) {
      double inter = 0;
      for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) inter += proj_v[i] * proj_v[j];
      logit += config.interaction_strength * inter / std::sqrt(pairs);
    }
    for (int f = 0; f < config.active_features; ++f) {
      const double x = normal(rng);
      data.numeric[active_col0 + f].push_back(x);
      logit += config.active_strength * active_w[f] * x /
               std::sqrt(static_cast<double>(config.active_features));
    }
    data.codes[domain_col].push_back(target ? 1 : 0);
    int y = unit(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0;
    if (unit(rng) < config.label_noise) y = 1 - y;
    data.labels.push_back(y);
  }

  DomainSplit& split = out.split;
  std::size_t r = 0;
  for (; r < config.source_size; ++r) split.source.push_back(r);
  for (std::size_t i = 0; i < config.target_labeled_size; ++i)
    split.target_labeled.push_back(r++);
  for (std::size_t i = 0; i < config.target_unlabeled_size; ++i)
    split.target_unlabeled.push_back(r++);
  for (std::size_t i = 0; i < config.target_test_size; ++i)
    split.target_test.push_back(r++);
  Standardize(data, split.source);
  return out;
}

}  // namespace vflda::data
