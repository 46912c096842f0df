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

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "test_util.h"
#include "vflda/adversarial.h"
#include "vflda/data.h"
#include "vflda/errors.h"
#include "vflda/grouping.h"

namespace vflda::grouping {
namespace {

using data::PartyRole;

TEST(GroupCount, PairwiseInteractionsAddKChooseTwo) {
  for (int k = 1; k <= 6; ++k) {
    NamedColumns base;
    std::vector<std::string> cols;
    for (int i = 0; i < k; ++i) {
      base.push_back({"g" + std::to_string(i), {"c" + std::to_string(i)}});
      cols.push_back("c" + std::to_string(i));
    }
    auto spec = FeatureGroupSpec::Build(base, true, cols);
    EXPECT_EQ(spec.g(), k + k * (k - 1) / 2);
    EXPECT_EQ(spec.k(), k);
    EXPECT_EQ(spec.z(), k * (k - 1) / 2);
    EXPECT_EQ(spec.g(), ExpectedGroupCount(k, true));
    EXPECT_EQ(FeatureGroupSpec::Build(base, false, cols).g(), k);
  }
  EXPECT_EQ(ExpectedGroupCount(4, true), 10);
  EXPECT_EQ(ExpectedGroupCount(5, true), 15);
}

TEST(GroupSpec, InteractionOrderAndColumns) {
  auto spec = FeatureGroupSpec::Build(
      {{"a", {"x1", "x2"}}, {"b", {"y1"}}, {"c", {"z1", "z2", "z3"}}}, true);
  ASSERT_EQ(spec.g(), 6);
  EXPECT_EQ(spec.group(3).name, "a-b");
  EXPECT_EQ(spec.group(4).name, "a-c");
  EXPECT_EQ(spec.group(5).name, "b-c");
  EXPECT_EQ(spec.group(4).columns,
            (std::vector<std::string>{"x1", "x2", "z1", "z2", "z3"}));
  EXPECT_EQ(spec.group(5).parents, (std::vector<int>{1, 2}));
  EXPECT_FALSE(spec.group(0).is_interaction());
  EXPECT_TRUE(spec.group(5).is_interaction());
}

TEST(GroupSpec, RejectsOverlapAndGaps) {
  EXPECT_THROW(FeatureGroupSpec::Build({{"a", {"x"}}, {"b", {"x"}}}, true),
               ConfigError);
  EXPECT_THROW(FeatureGroupSpec::Build({{"a", {"x"}}}, true, {"x", "y"}),
               ConfigError);
  EXPECT_THROW(FeatureGroupSpec::Build({{"a", {"x", "q"}}}, true, {"x"}),
               ConfigError);
  EXPECT_THROW(FeatureGroupSpec::Build({{"a", {"x"}}, {"a", {"y"}}}, true),
               ConfigError);
  EXPECT_THROW(FeatureGroupSpec::Build({{"a", {}}}, true), ConfigError);
  EXPECT_THROW(FeatureGroupSpec::Build({}, true), ConfigError);
}

TEST(GroupSpec, JsonRoundTrip) {
  auto spec = FeatureGroupSpec::Build({{"a", {"x"}}, {"b", {"y", "z"}}}, true);
  auto back = FeatureGroupSpec::FromJson(spec.ToJson(), true);
  ASSERT_EQ(back.g(), spec.g());
  for (int i = 0; i < spec.g(); ++i) {
    EXPECT_EQ(back.group(i).name, spec.group(i).name);
    EXPECT_EQ(back.group(i).columns, spec.group(i).columns);
  }
}

// Three passive numeric columns plus one categorical (vocab 4, dim 2).
data::TabularDataset SmallData() {
  nlohmann::json sj = {
      {"label", "y"},
      {"columns",
       {{{"name", "p"}, {"party", "active"}},
        {{"name", "n1"}},
        {{"name", "n2"}},
        {{"name", "n3"}},
        {{"name", "cat"},
         {"kind", "categorical"},
         {"vocab", {"a", "b", "c", "d"}},
         {"embedding_dim", 2}}}}};
  const std::string csv =
      "p,n1,n2,n3,cat,y\n"
      "0.5,1,2,3,a,1\n"
      "0.1,4,5,6,c,0\n"
      "0.2,7,8,9,d,1\n";
  return data::ParseCsv(csv, data::Schema::FromJson(sj));
}

TEST(GroupEncoder, DimsFollowColumnsAndEmbeddings) {
  auto d = SmallData();
  auto spec = FeatureGroupSpec::Build(
      {{"u", {"n1", "n2"}}, {"v", {"n3"}}, {"w", {"cat"}}}, true,
      {"n1", "n2", "n3", "cat"});
  nn::Rng rng(1);
  GroupEncoder enc(spec, d, rng);
  EXPECT_EQ(enc.group_input_dims(), (std::vector<int>{2, 1, 2, 3, 4, 3}));
  auto base = FeatureGroupSpec::Build({{"u", {"n1", "n2"}}, {"v", {"n3"}}},
                                      false);
  EXPECT_EQ(base.g(), 2);
}

TEST(GroupEncoder, InteractionInputIsParentConcatenation) {
  auto d = SmallData();
  auto spec = FeatureGroupSpec::Build(
      {{"u", {"n1", "n2"}}, {"v", {"n3"}}, {"w", {"cat"}}}, true,
      {"n1", "n2", "n3", "cat"});
  nn::Rng rng(2);
  GroupEncoder enc(spec, d, rng);
  auto view = data::MakePartyView(d, {0, 1, 2}, PartyRole::kPassive, false);
  auto batch = enc.Assemble(view, {2, 0});
  ASSERT_EQ(batch.inputs.size(), 6u);
  EXPECT_EQ(batch.batch_size(), 2u);
  EXPECT_DOUBLE_EQ(batch.inputs[0](0, 0), 7.0);
  EXPECT_DOUBLE_EQ(batch.inputs[0](1, 1), 2.0);
  for (int gi = 3; gi < 6; ++gi) {
    const auto& grp = spec.group(gi);
    const auto& a = batch.inputs[grp.parents[0]];
    const auto& b = batch.inputs[grp.parents[1]];
    nn::Matrix cat(a.rows(), a.cols() + b.cols());
    cat << a, b;
    EXPECT_EQ(batch.inputs[gi], cat) << grp.name;
  }
  // Embedding rows appear verbatim.
  const auto& table = enc.embeddings()[0];
  EXPECT_DOUBLE_EQ(batch.inputs[2](0, 0), table.table()(3, 0));
  EXPECT_DOUBLE_EQ(batch.inputs[2](1, 1), table.table()(0, 1));
}

TEST(GroupEncoder, RejectsActiveView) {
  auto d = SmallData();
  auto spec = FeatureGroupSpec::Build({{"u", {"n1", "n2", "n3", "cat"}}}, false);
  nn::Rng rng(3);
  GroupEncoder enc(spec, d, rng);
  auto active = data::MakePartyView(d, {0}, PartyRole::kActive, true);
  EXPECT_ANY_THROW(enc.Assemble(active, {}));
  auto passive = data::MakePartyView(d, {0}, PartyRole::kPassive, false);
  EXPECT_THROW(enc.Assemble(passive, {5}), DimensionError);
}

TEST(GroupSpec, SingleGroupHoldsEverything) {
  auto spec = FeatureGroupSpec::SingleGroup({"a", "b", "c"});
  EXPECT_EQ(spec.g(), 1);
  EXPECT_EQ(spec.group(0).name, "all_feat");
  EXPECT_FALSE(spec.interactions_enabled());
}

// The Census reference layout reproduces the published extractor inputs:
// four base groups of width 28, 25, 56 and 27 and six pairwise groups.
class CensusLayout : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ifstream in(testing::SourceDir() + "/configs/census_reference.json");
    ASSERT_TRUE(in.good());
    config_ = nlohmann::json::parse(in, nullptr, true, true);
    const auto schema = data::Schema::FromJson(config_["data"]["schema"]);
    std::ostringstream header;
    for (const auto& c : schema.columns) header << c.name << ",";
    header << schema.label_column << "\n";
    data_ = data::ParseCsv(header.str(), schema);
    for (const auto& g : config_["groups"]) {
      base_.emplace_back(g["name"].get<std::string>(),
                         g["columns"].get<std::vector<std::string>>());
    }
    for (int c : data_.PartyColumns(PartyRole::kPassive)) {
      passive_.push_back(data_.columns[c].name);
    }
  }

  nlohmann::json config_;
  data::TabularDataset data_;
  NamedColumns base_;
  std::vector<std::string> passive_;
};

TEST_F(CensusLayout, GroupInputDims) {
  EXPECT_EQ(passive_.size(), 31u);
  EXPECT_EQ(data_.PartyColumns(PartyRole::kActive).size(), 5u);
  auto spec = FeatureGroupSpec::Build(base_, true, passive_);
  ASSERT_EQ(spec.g(), 10);
  nn::Rng rng(0);
  GroupEncoder enc(spec, data_, rng);
  const std::vector<std::string> names = {
      "emp", "demo", "migr", "house", "emp-demo", "emp-migr",
      "emp-house", "demo-migr", "demo-house", "migr-house"};
  // emp-house is listed as 51 in the published table, but concatenating
  // emp (28) and house (27) gives 55; every other row is consistent.
  const std::vector<int> dims = {28, 25, 56, 27, 53, 84, 55, 81, 52, 83};
  for (int i = 0; i < 10; ++i) EXPECT_EQ(spec.group(i).name, names[i]);
  EXPECT_EQ(enc.group_input_dims(), dims);

  auto single = FeatureGroupSpec::SingleGroup(passive_);
  GroupEncoder all(single, data_, rng);
  EXPECT_EQ(all.group_input_dims(), (std::vector<int>{136}));
}

TEST_F(CensusLayout, ExtractorTableBuilds) {
  auto spec = FeatureGroupSpec::Build(base_, true, passive_);
  auto arch = adversarial::ArchitectureConfig::FromJson(config_["architecture"]);
  auto model = adversarial::PassiveModel::Create(spec, data_, arch, {});
  EXPECT_EQ(model.g(), 10);
  // The literal 51-input row cannot be wired to the 55-wide group.
  arch.extractors["emp-house"] = "FC(51->81)-FC(81->55)-FC(55->15)";
  EXPECT_THROW(adversarial::PassiveModel::Create(spec, data_, arch, {}),
               ConfigError);
}

}  // namespace
}  // namespace vflda::grouping
