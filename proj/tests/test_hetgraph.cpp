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

#include <algorithm>
#include <set>

#include "common/error.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "hetgraph/hetero_graph.hpp"
#include "pipeline/run_config.hpp"

using namespace predgap;
using namespace predgap::hetgraph;
using synthpop::Relation;

TEST_CASE("csr adjacency from pairs") {
  const std::vector<std::pair<int32_t, int32_t>> pairs = {{0, 2}, {1, 2}, {0, 1}, {2, 0}};
  const RelationAdjacency a = MakeAdjacency(Relation::kClassmates, 3, 3, pairs);
  // in: neighbors of each target.
  REQUIRE(a.in.rows() == 3);
  CHECK(a.in.Degree(0) == 1);
  CHECK(a.in.Degree(1) == 1);
  CHECK(a.in.Degree(2) == 2);
  std::vector<int32_t> into2(a.in.Row(2).begin(), a.in.Row(2).end());
  std::sort(into2.begin(), into2.end());
  CHECK(into2 == std::vector<int32_t>{0, 1});
  CHECK(a.out.Degree(0) == 2);
  CHECK(a.out.Degree(2) == 1);

  const std::vector<std::pair<int32_t, int32_t>> bad = {{0, 7}};
  CHECK_THROWS_AS(MakeAdjacency(Relation::kClassmates, 3, 3, bad), InvariantError);
}

TEST_CASE("graph built from a registry mirrors its relations") {
  auto c = pipeline::ScenarioPreset("linear");
  c.n_children = 400;
  const auto reg = synthpop::GenerateRegistry(c);
  const HeteroGraph g = BuildHeteroGraph(reg);
  REQUIRE(g.child_ids.size() == reg.children.size());
  for (size_t i = 0; i < g.child_ids.size(); ++i) CHECK(g.child_ids[i] == reg.children[i].child_id);
  CHECK(g.PresentRelations().size() == synthpop::kNumRelations);
  CHECK(g.child_features.allFinite());
  CHECK(g.person_features.allFinite());

  // Canonical edges equal the registry's classmate pairs as a set.
  const auto& pairs = reg.Edges(Relation::kClassmates).pairs;
  const std::set<std::pair<int64_t, int64_t>> expect(pairs.begin(), pairs.end());
  const auto got = CanonicalEdges(g, Relation::kClassmates);
  CHECK(std::set<std::pair<int64_t, int64_t>>(got.begin(), got.end()) == expect);

  // Restricted contexts drop out-of-scope relations.
  const HeteroGraph nuclear = BuildHeteroGraph(reg, features::ContextSetSpec::Prefix(2));
  CHECK(nuclear.HasRelation(Relation::kParents));
  CHECK_FALSE(nuclear.HasRelation(Relation::kClassmates));
  CHECK_FALSE(nuclear.HasRelation(Relation::kNeighbors));
  CHECK_THROWS_AS(nuclear.Adjacency(Relation::kNeighbors), InvalidArgument);
  CHECK(nuclear.SchemaHash() != g.SchemaHash());
}

TEST_CASE("export then import is lossless") {
  testing::TempDir dir("graph");
  HeteroGraph g = testing::ToyGraph(4);
  g.split[2] = SplitLabel::kTest;
  g.split[3] = SplitLabel::kValidation;
  ExportGraph(g, dir.path());
  const HeteroGraph back = ImportGraph(dir.path());
  CHECK(back.SchemaHash() == g.SchemaHash());
  CHECK(back.child_features == g.child_features);
  CHECK(back.person_features == g.person_features);
  CHECK(back.outcomes == g.outcomes);
  CHECK(back.split == g.split);
  for (Relation r : synthpop::kAllRelations) CHECK(CanonicalEdges(back, r) == CanonicalEdges(g, r));
  CHECK_THROWS_AS(ImportGraph(dir / "missing"), DependencyError);
}

TEST_CASE("neighbor slices are bounds-checked") {
  const HeteroGraph g = testing::ToyGraph(2);
  CHECK(NeighborSlice(g, 9, Relation::kParents).empty());
  CHECK_THROWS_AS(NeighborSlice(g, 99, Relation::kParents), InvalidArgument);
}
