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

#ifndef PREDGAP_HETGRAPH_HETERO_GRAPH_HPP_
#define PREDGAP_HETGRAPH_HETERO_GRAPH_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/matrix.hpp"
#include "features/feature_table.hpp"
#include "synthpop/registry.hpp"

namespace predgap::hetgraph {

using synthpop::NodeType;
using synthpop::Relation;

enum class SplitLabel : uint8_t { kTrain = 0, kTest = 1, kValidation = 2 };
std::string_view SplitLabelName(SplitLabel s);
SplitLabel ParseSplitLabel(std::string_view s);

// Compressed rows: neighbors of row r are indices[offsets[r] .. offsets[r+1]).
struct Csr {
  std::vector<int64_t> offsets{0};
  std::vector<int32_t> indices;

  size_t rows() const { return offsets.size() - 1; }
  std::span<const int32_t> Row(size_t r) const {
    return {indices.data() + offsets[r], static_cast<size_t>(offsets[r + 1] - offsets[r])};
  }
  size_t Degree(size_t r) const { return static_cast<size_t>(offsets[r + 1] - offsets[r]); }
};

// Both directions are materialized: `in` rows are target nodes listing
// their source neighbors (message gathering), `out` rows are source nodes
// listing their targets (gradient scattering).
struct RelationAdjacency {
  Relation relation = Relation::kClassmates;
  Csr in;
  Csr out;
};

struct HeteroGraph {
  std::string context;
  std::vector<int64_t> child_ids;
  std::vector<int64_t> person_ids;
  std::vector<std::string> child_feature_names;
  std::vector<std::string> person_feature_names;
  RowMatrix child_features;
  RowMatrix person_features;
  std::array<std::optional<RelationAdjacency>, synthpop::kNumRelations> relations;
  std::vector<int> outcomes;
  std::vector<SplitLabel> split;

  size_t NumNodes(NodeType t) const { return t == NodeType::kChild ? child_ids.size() : person_ids.size(); }
  const RowMatrix& Features(NodeType t) const {
    return t == NodeType::kChild ? child_features : person_features;
  }
  bool HasRelation(Relation r) const { return relations[static_cast<size_t>(r)].has_value(); }
  // Throws InvalidArgument when the relation is absent from this graph.
  const RelationAdjacency& Adjacency(Relation r) const;
  std::vector<Relation> PresentRelations() const;
  // Relations whose messages land on nodes of type t, in enum order.
  std::vector<Relation> RelationsInto(NodeType t) const;

  // Schema fingerprint: feature names per type plus present relations.
  uint64_t SchemaHash() const;
};

// Feature and relation inclusion follow the context set: F adds the
// parent/child relations, person nodes and WPO/parent-known features, H the
// household aggregates, E the grandparent relation and features, S the
// classmate relation and school features, N the neighbor relation.
// Deceased persons are not nodes. Throws InvariantError if the registry
// violates its edge invariants.
HeteroGraph BuildHeteroGraph(const synthpop::Registry& registry,
                             const features::ContextSetSpec& context = features::ContextSetSpec::Full());

// In-neighbors of `node` (a node of the relation's target type).
std::span<const int32_t> NeighborSlice(const HeteroGraph& graph, size_t node, Relation relation);

// Builds both CSR directions from (source_index, target_index) pairs.
RelationAdjacency MakeAdjacency(Relation r, size_t n_source, size_t n_target,
                                std::span<const std::pair<int32_t, int32_t>> pairs);

// Sorted (source_id, target_id) pairs of a relation, for canonical
// comparisons.
std::vector<std::pair<int64_t, int64_t>> CanonicalEdges(const HeteroGraph& graph, Relation r);

void ExportGraph(const HeteroGraph& graph, const std::filesystem::path& dir);
HeteroGraph ImportGraph(const std::filesystem::path& dir);

}  // namespace predgap::hetgraph

#endif  // PREDGAP_HETGRAPH_HETERO_GRAPH_HPP_
