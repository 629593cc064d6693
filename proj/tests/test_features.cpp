/*
 * Copyright 2026 The predgap Authors.
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

#include <cmath>
#include <set>

#include "common/error.hpp"
#include "doctest.h"
#include "features/feature_table.hpp"
#include "features/transforms.hpp"
#include "fixtures.hpp"
#include "pipeline/run_config.hpp"
#include "synthpop/registry.hpp"

using namespace predgap;
using namespace predgap::features;

namespace {

const synthpop::Registry& SharedRegistry() {
  static const synthpop::Registry reg = [] {
    auto c = pipeline::ScenarioPreset("linear");
    c.n_children = 500;
    c.rng_seed = 17;
    return synthpop::GenerateRegistry(c);
  }();
  return reg;
}

}  // namespace

TEST_CASE("rank transform uses midranks over n") {
  const std::vector<double> v = {5, 5, 10};
  const auto r = RankTransform(std::span<const double>(v));
  CHECK(r == std::vector<double>{0.5, 0.5, 1.0});

  OptionalColumn with_missing = {3.0, std::nullopt, 1.0};
  const auto rm = RankTransform(with_missing);
  CHECK_FALSE(rm[1].has_value());
  CHECK(*rm[0] == 1.0);
  CHECK(*rm[2] == 0.5);

  const std::vector<double> ref = {1, 2, 3, 4};
  const auto against = RankAgainst({2.0, 10.0, 0.0}, ref);
  CHECK(*against[0] == doctest::Approx(0.5));
  CHECK(*against[1] == doctest::Approx(1.0));
  CHECK(*against[2] == doctest::Approx(0.0));
}

TEST_CASE("scalers") {
  const std::vector<double> v = {1, 2, 3};
  const auto z = ZScore(std::span<const double>(v));
  CHECK(z[0] == doctest::Approx(-1.224744871391589));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.224744871391589));
  CHECK(MinMaxScale(std::span<const double>(v)) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(LogTransform(std::span<const double>(v))[0] == doctest::Approx(std::log(2.0)));
  const std::vector<double> flat = {4, 4};
  CHECK_THROWS_AS(ZScore(std::span<const double>(flat)), InvalidArgument);
  const std::vector<double> negative = {-1};
  CHECK_THROWS_AS(LogTransform(std::span<const double>(negative)), InvalidArgument);
}

TEST_CASE("context sets must be prefixes of the nested order") {
  CHECK(ContextSetSpec::Parse("I,F").ToString() == "I,F");
  CHECK(ContextSetSpec::Parse("nuclear").size() == 2);
  CHECK(ContextSetSpec::Full().size() == 6);
  CHECK_THROWS_AS(ContextSetSpec::Parse("I,H"), InvalidArgument);
  CHECK_THROWS_AS(ContextSetSpec::Parse("F"), InvalidArgument);
  CHECK_THROWS_AS(ContextSetSpec::Parse("martian"), InvalidArgument);
}

TEST_CASE("nested feature tables grow monotonically") {
  const auto& reg = SharedRegistry();
  std::set<std::string> previous;
  for (size_t k = 1; k <= 6; ++k) {
    const ContextSetSpec spec = ContextSetSpec::Prefix(k);
    const FeatureTable t = BuildFeatureTable(reg, spec);
    CHECK(t.n_rows() == reg.children.size());
    const auto names = t.ColumnNames();
    const std::set<std::string> current(names.begin(), names.end());
    CHECK(current.size() > previous.size());
    for (const auto& name : previous) CHECK(current.count(name) == 1);
    for (const auto& col : t.columns) CHECK(spec.Contains(col.group));
    previous = current;
  }
}

TEST_CASE("full feature table is finite with consistent indicators") {
  const FeatureTable t = BuildFeatureTable(SharedRegistry(), ContextSetSpec::Full());
  CHECK(t.Column("F: Father known").group == ContextGroup::kF);
  CHECK(t.Column("S: Mean income rank (s)").group == ContextGroup::kS);
  CHECK_THROWS(t.Column("nope"));
  std::set<std::string> names;
  for (const auto& col : t.columns) {
    CHECK(names.insert(col.name).second);
    REQUIRE(col.values.size() == t.n_rows());
    for (double v : col.values) CHECK(std::isfinite(v));
    if (col.indicator_of) {
      CHECK(col.transform == Transform::kIndicator);
      CHECK_NOTHROW(t.Column(*col.indicator_of));
      for (double v : col.values) CHECK((v == 0.0 || v == 1.0));
    }
  }
  const auto m = t.Matrix();
  CHECK(m.rows() == static_cast<Eigen::Index>(t.n_rows()));
  CHECK(m.cols() == static_cast<Eigen::Index>(t.n_cols()));
}

TEST_CASE("feature tables persist with their schema") {
  testing::TempDir dir("ft");
  const FeatureTable t = BuildFeatureTable(SharedRegistry(), ContextSetSpec::Prefix(3));
  SaveFeatureTable(t, dir.path());
  const FeatureTable back = LoadFeatureTable(dir.path());
  CHECK(back.SchemaHash() == t.SchemaHash());
  CHECK(back.child_ids == t.child_ids);
  CHECK(back.Matrix() == t.Matrix());
  CHECK(BuildFeatureTable(SharedRegistry(), ContextSetSpec::Prefix(4)).SchemaHash() != t.SchemaHash());
}

TEST_CASE("outcomes follow registry order") {
  const auto& reg = SharedRegistry();
  const auto y = Outcomes(reg);
  REQUIRE(y.size() == reg.children.size());
  for (size_t i = 0; i < y.size(); ++i) CHECK(y[i] == reg.children[i].outcome_university);
}
