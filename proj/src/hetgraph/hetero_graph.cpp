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

#include "hetgraph/hetero_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "common/error.hpp"
#include "common/io.hpp"
#include "features/transforms.hpp"

namespace predgap::hetgraph {

using features::ContextGroup;
using synthpop::Registry;

std::string_view SplitLabelName(SplitLabel s) {
  switch (s) {
    case SplitLabel::kTrain: return "train";
    case SplitLabel::kTest: return "test";
    case SplitLabel::kValidation: return "validation";
  }
  return "train";
}

SplitLabel ParseSplitLabel(std::string_view s) {
  if (s == "train") return SplitLabel::kTrain;
  if (s == "test") return SplitLabel::kTest;
  if (s == "validation") return SplitLabel::kValidation;
  throw InvalidArgument("unknown split label '" + std::string(s) + "'");
}

const RelationAdjacency& HeteroGraph::Adjacency(Relation r) const {
  const auto& a = relations[static_cast<size_t>(r)];
  if (!a) throw InvalidArgument("relation '" + std::string(synthpop::RelationName(r)) + "' not in graph");
  return *a;
}

std::vector<Relation> HeteroGraph::PresentRelations() const {
  std::vector<Relation> out;
  for (Relation r : synthpop::kAllRelations) {
    if (HasRelation(r)) out.push_back(r);
  }
  return out;
}

std::vector<Relation> HeteroGraph::RelationsInto(NodeType t) const {
  std::vector<Relation> out;
  for (Relation r : synthpop::kAllRelations) {
    if (HasRelation(r) && synthpop::TargetType(r) == t) out.push_back(r);
  }
  return out;
}

uint64_t HeteroGraph::SchemaHash() const {
  std::string s = "child:";
  for (const auto& n : child_feature_names) s += n + ";";
  s += "|person:";
  for (const auto& n : person_feature_names) s += n + ";";
  s += "|rel:";
  for (Relation r : PresentRelations()) s += std::string(synthpop::RelationName(r)) + ";";
  return Fnv1a64(s);
}

RelationAdjacency MakeAdjacency(Relation r, size_t n_source, size_t n_target,
                                std::span<const std::pair<int32_t, int32_t>> pairs) {
  RelationAdjacency adj;
  adj.relation = r;
  auto fill = [&](Csr& csr, size_t n_rows, bool by_target) {
    csr.offsets.assign(n_rows + 1, 0);
    for (const auto& [s, t] : pairs) {
      const int32_t row = by_target ? t : s;
      if (row < 0 || static_cast<size_t>(row) >= n_rows) throw InvariantError("adjacency index out of range");
      ++csr.offsets[row + 1];
    }
    for (size_t i = 0; i < n_rows; ++i) csr.offsets[i + 1] += csr.offsets[i];
    csr.indices.assign(pairs.size(), 0);
    std::vector<int64_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
    for (const auto& [s, t] : pairs) {
      const int32_t row = by_target ? t : s;
      csr.indices[cursor[row]++] = by_target ? s : t;
    }
    for (size_t i = 0; i < n_rows; ++i) {
      std::sort(csr.indices.begin() + csr.offsets[i], csr.indices.begin() + csr.offsets[i + 1]);
    }
  };
  for (const auto& pair : pairs) {
    if (pair.first < 0 || static_cast<size_t>(pair.first) >= n_source) {
      throw InvariantError("adjacency index out of range");
    }
  }
  fill(adj.in, n_target, true);
  fill(adj.out, n_source, false);
  return adj;
}

namespace {

std::vector<double> MinMaxOrZero(const std::vector<double>& v) {
  if (v.empty()) return v;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi <= *lo) return std::vector<double>(v.size(), 0.0);
  return features::MinMaxScale(std::span<const double>(v));
}

void AddColumn(std::vector<std::string>& names, std::vector<std::vector<double>>& cols, std::string name,
               std::vector<double> values) {
  names.push_back(std::move(name));
  cols.push_back(std::move(values));
}

RowMatrix ToMatrix(const std::vector<std::vector<double>>& cols, size_t n_rows) {
  RowMatrix m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    for (size_t i = 0; i < n_rows; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  }
  return m;
}

void CheckFinite(const RowMatrix& m, const std::vector<std::string>& names, std::string_view type) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        throw InvariantError(std::string(type) + " feature '" + names[static_cast<size_t>(j)] +
                             "' has a non-finite value");
      }
    }
  }
}

}  // namespace

HeteroGraph BuildHeteroGraph(const Registry& registry, const features::ContextSetSpec& context) {
  synthpop::ValidateRegistry(registry);
  const features::RegistryView view(registry);
  const features::FeatureTable table = features::BuildFeatureTable(view, context);
  const size_t nc = registry.children.size();

  HeteroGraph g;
  g.context = context.ToString();
  g.child_ids.reserve(nc);
  g.outcomes.reserve(nc);
  for (const auto& c : registry.children) {
    g.child_ids.push_back(c.child_id);
    g.outcomes.push_back(c.outcome_university);
  }
  g.split.assign(nc, SplitLabel::kTrain);

  // Child features.
  std::vector<std::vector<double>> cols;
  {
    std::vector<double> by(nc), mg(nc), gender(nc), dis(nc), sbo(nc);
    for (size_t i = 0; i < nc; ++i) {
      const auto& c = registry.children[i];
      by[i] = c.birth_year;
      mg[i] = c.migration_generation;
      gender[i] = c.gender_male ? *c.gender_male : 0.5;
      dis[i] = c.disability;
      sbo[i] = c.special_education_sbo;
    }
    AddColumn(g.child_feature_names, cols, "birth_year", MinMaxOrZero(by));
    AddColumn(g.child_feature_names, cols, "migration_generation", MinMaxOrZero(mg));
    AddColumn(g.child_feature_names, cols, "gender_male", std::move(gender));
    AddColumn(g.child_feature_names, cols, "disability", std::move(dis));
    AddColumn(g.child_feature_names, cols, "sbo", std::move(sbo));
  }
  if (context.Contains(ContextGroup::kF)) {
    std::vector<double> received(nc), weight(nc), missing(nc), father(nc), mother(nc);
    for (size_t i = 0; i < nc; ++i) {
      const auto& c = registry.children[i];
      received[i] = c.wpo_weight && *c.wpo_weight > 0.0 ? 1.0 : 0.0;
      weight[i] = c.wpo_weight.value_or(0.0);
      missing[i] = c.wpo_weight ? 0.0 : 1.0;
      father[i] = view.father()[i] ? 1.0 : 0.0;
      mother[i] = view.mother()[i] ? 1.0 : 0.0;
    }
    AddColumn(g.child_feature_names, cols, "wpo_received", std::move(received));
    AddColumn(g.child_feature_names, cols, "wpo_weight", std::move(weight));
    AddColumn(g.child_feature_names, cols, "wpo_missing", std::move(missing));
    AddColumn(g.child_feature_names, cols, "father_known", std::move(father));
    AddColumn(g.child_feature_names, cols, "mother_known", std::move(mother));
  }
  // Context aggregates reuse the tabular transforms (already imputed).
  const std::vector<std::pair<ContextGroup, std::vector<std::pair<const char*, const char*>>>> from_table = {
      {ContextGroup::kH,
       {{"H: Mean household income", "hh_mean_income"}, {"H: Total household income", "hh_total_income"}}},
      {ContextGroup::kE,
       {{"E: Known grandparents", "known_grandparents"},
        {"E: Grandparents in municipality", "grandparents_in_municipality"}}},
      {ContextGroup::kS,
       {{"S: Class size", "class_size"},
        {"S: Average class size", "avg_class_size"},
        {"S: School urbanicity", "log_urbanicity"},
        {"S: Share income reported (s)", "share_income_reported"}}},
  };
  for (const auto& [group, entries] : from_table) {
    if (!context.Contains(group)) continue;
    for (const auto& [src, dst] : entries) {
      AddColumn(g.child_feature_names, cols, dst, table.Column(src).values);
    }
  }
  g.child_features = ToMatrix(cols, nc);
  CheckFinite(g.child_features, g.child_feature_names, "child");

  // Person nodes exist once any person relation is in scope.
  std::vector<int32_t> person_node(registry.persons.size(), -1);
  if (context.Contains(ContextGroup::kF)) {
    std::vector<size_t> rows;
    for (size_t p = 0; p < registry.persons.size(); ++p) {
      if (!registry.persons[p].alive) continue;
      person_node[p] = static_cast<int32_t>(rows.size());
      rows.push_back(p);
    }
    const size_t np = rows.size();
    std::vector<double> by(np), mg(np), gender(np), deg(np), deg_missing(np), rank(np), rank_missing(np);
    for (size_t k = 0; k < np; ++k) {
      const auto& p = registry.persons[rows[k]];
      g.person_ids.push_back(p.person_id);
      by[k] = p.birth_year;
      mg[k] = p.migration_generation;
      gender[k] = p.gender_male ? *p.gender_male : 0.5;
      deg[k] = p.has_university_degree.value_or(0);
      deg_missing[k] = p.has_university_degree ? 0.0 : 1.0;
      const auto& r = view.person_rank()[rows[k]];
      rank[k] = r.value_or(0.0);
      rank_missing[k] = r ? 0.0 : 1.0;
    }
    std::vector<std::vector<double>> pcols;
    AddColumn(g.person_feature_names, pcols, "birth_year", MinMaxOrZero(by));
    AddColumn(g.person_feature_names, pcols, "migration_generation", MinMaxOrZero(mg));
    AddColumn(g.person_feature_names, pcols, "gender_male", std::move(gender));
    AddColumn(g.person_feature_names, pcols, "university_degree", std::move(deg));
    AddColumn(g.person_feature_names, pcols, "university_degree_missing", std::move(deg_missing));
    AddColumn(g.person_feature_names, pcols, "income_rank", std::move(rank));
    AddColumn(g.person_feature_names, pcols, "income_missing", std::move(rank_missing));
    g.person_features = ToMatrix(pcols, np);
    CheckFinite(g.person_features, g.person_feature_names, "person");
  } else {
    g.person_features = RowMatrix(0, 0);
  }

  // Relations in scope.
  std::vector<Relation> in_scope;
  if (context.Contains(ContextGroup::kF)) {
    in_scope.push_back(Relation::kParents);
    in_scope.push_back(Relation::kChildren);
  }
  if (context.Contains(ContextGroup::kE)) in_scope.push_back(Relation::kParentOrChild);
  if (context.Contains(ContextGroup::kS)) in_scope.push_back(Relation::kClassmates);
  if (context.Contains(ContextGroup::kN)) in_scope.push_back(Relation::kNeighbors);
  std::sort(in_scope.begin(), in_scope.end());

  const auto child_index = registry.ChildIndex();
  const auto person_index = registry.PersonIndex();
  auto node_of = [&](int64_t id, NodeType t) -> int32_t {
    if (t == NodeType::kChild) return static_cast<int32_t>(child_index.at(id));
    const int32_t n = person_node[person_index.at(id)];
    if (n < 0) throw InvariantError("edge touches a deceased person " + std::to_string(id));
    return n;
  };
  for (Relation r : in_scope) {
    const auto st = synthpop::SourceType(r);
    const auto tt = synthpop::TargetType(r);
    std::vector<std::pair<int32_t, int32_t>> pairs;
    pairs.reserve(registry.Edges(r).pairs.size());
    for (const auto& [s, t] : registry.Edges(r).pairs) pairs.emplace_back(node_of(s, st), node_of(t, tt));
    g.relations[static_cast<size_t>(r)] = MakeAdjacency(r, g.NumNodes(st), g.NumNodes(tt), pairs);
  }
  return g;
}

std::span<const int32_t> NeighborSlice(const HeteroGraph& graph, size_t node, Relation relation) {
  const auto& adj = graph.Adjacency(relation);
  if (node >= adj.in.rows()) {
    throw InvalidArgument("node " + std::to_string(node) + " out of range for relation '" +
                          std::string(synthpop::RelationName(relation)) + "'");
  }
  return adj.in.Row(node);
}

std::vector<std::pair<int64_t, int64_t>> CanonicalEdges(const HeteroGraph& graph, Relation r) {
  const auto& adj = graph.Adjacency(r);
  const auto& src_ids = synthpop::SourceType(r) == NodeType::kChild ? graph.child_ids : graph.person_ids;
  const auto& dst_ids = synthpop::TargetType(r) == NodeType::kChild ? graph.child_ids : graph.person_ids;
  std::vector<std::pair<int64_t, int64_t>> out;
  out.reserve(adj.in.indices.size());
  for (size_t t = 0; t < adj.in.rows(); ++t) {
    for (int32_t s : adj.in.Row(t)) out.emplace_back(src_ids[s], dst_ids[t]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ExportGraph(const HeteroGraph& graph, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter w(dir / "child_nodes.csv");
    std::vector<std::string> header = {"child_id", "outcome", "split"};
    header.insert(header.end(), graph.child_feature_names.begin(), graph.child_feature_names.end());
    w.WriteRow(header);
    std::vector<std::string> row(header.size());
    for (size_t i = 0; i < graph.child_ids.size(); ++i) {
      row[0] = std::to_string(graph.child_ids[i]);
      row[1] = std::to_string(graph.outcomes[i]);
      row[2] = std::string(SplitLabelName(graph.split[i]));
      for (size_t j = 0; j < graph.child_feature_names.size(); ++j) {
        row[3 + j] = FormatDouble(graph.child_features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
      w.WriteRow(row);
    }
    w.Close();
  }
  {
    CsvWriter w(dir / "person_nodes.csv");
    std::vector<std::string> header = {"person_id"};
    header.insert(header.end(), graph.person_feature_names.begin(), graph.person_feature_names.end());
    w.WriteRow(header);
    std::vector<std::string> row(header.size());
    for (size_t i = 0; i < graph.person_ids.size(); ++i) {
      row[0] = std::to_string(graph.person_ids[i]);
      for (size_t j = 0; j < graph.person_feature_names.size(); ++j) {
        row[1 + j] = FormatDouble(graph.person_features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
      w.WriteRow(row);
    }
    w.Close();
  }
  Json rels = Json::array();
  for (Relation r : graph.PresentRelations()) {
    const auto& adj = graph.Adjacency(r);
    const auto& src_ids = synthpop::SourceType(r) == NodeType::kChild ? graph.child_ids : graph.person_ids;
    const auto& dst_ids = synthpop::TargetType(r) == NodeType::kChild ? graph.child_ids : graph.person_ids;
    CsvWriter w(dir / ("edges_" + std::string(synthpop::RelationName(r)) + ".csv"));
    w.WriteRow({"source_id", "target_id"});
    for (size_t t = 0; t < adj.in.rows(); ++t) {
      for (int32_t s : adj.in.Row(t)) w.WriteRow({std::to_string(src_ids[s]), std::to_string(dst_ids[t])});
    }
    w.Close();
    rels.push_back({{"relation", synthpop::RelationName(r)},
                    {"source_type", synthpop::SourceType(r) == NodeType::kChild ? "child" : "person"},
                    {"target_type", synthpop::TargetType(r) == NodeType::kChild ? "child" : "person"},
                    {"n_edges", adj.in.indices.size()}});
  }
  Json schema;
  schema["context"] = graph.context;
  schema["n_children"] = graph.child_ids.size();
  schema["n_persons"] = graph.person_ids.size();
  schema["child_features"] = graph.child_feature_names;
  schema["person_features"] = graph.person_feature_names;
  schema["relations"] = rels;
  schema["schema_hash"] = HexU64(graph.SchemaHash());
  WriteJsonFile(dir / "graph.schema.json", schema);
}

HeteroGraph ImportGraph(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "graph.schema.json")) {
    throw DependencyError("graph not found in " + dir.string() + " (run `prep` first)");
  }
  const Json schema = ReadJsonFile(dir / "graph.schema.json");
  HeteroGraph g;
  g.context = schema.at("context").get<std::string>();
  g.child_feature_names = schema.at("child_features").get<std::vector<std::string>>();
  g.person_feature_names = schema.at("person_features").get<std::vector<std::string>>();

  auto load_nodes = [](const std::filesystem::path& path, size_t lead, size_t n_feat,
                       std::vector<std::vector<std::string>>& rows_out) {
    CsvTable csv = ReadCsv(path);
    if (csv.header.size() != lead + n_feat) throw DependencyError(path.string() + " does not match its schema");
    rows_out = std::move(csv.rows);
  };
  std::vector<std::vector<std::string>> rows;
  load_nodes(dir / "child_nodes.csv", 3, g.child_feature_names.size(), rows);
  g.child_features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(g.child_feature_names.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    g.child_ids.push_back(ParseInt(rows[i][0]));
    g.outcomes.push_back(static_cast<int>(ParseInt(rows[i][1])));
    g.split.push_back(ParseSplitLabel(rows[i][2]));
    for (size_t j = 0; j < g.child_feature_names.size(); ++j) {
      g.child_features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ParseDouble(rows[i][3 + j]);
    }
  }
  load_nodes(dir / "person_nodes.csv", 1, g.person_feature_names.size(), rows);
  g.person_features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(g.person_feature_names.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    g.person_ids.push_back(ParseInt(rows[i][0]));
    for (size_t j = 0; j < g.person_feature_names.size(); ++j) {
      g.person_features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ParseDouble(rows[i][1 + j]);
    }
  }
  std::unordered_map<int64_t, int32_t> child_node, person_node;
  for (size_t i = 0; i < g.child_ids.size(); ++i) child_node[g.child_ids[i]] = static_cast<int32_t>(i);
  for (size_t i = 0; i < g.person_ids.size(); ++i) person_node[g.person_ids[i]] = static_cast<int32_t>(i);
  for (const auto& rel : schema.at("relations")) {
    const Relation r = synthpop::ParseRelation(rel.at("relation").get<std::string>());
    const auto& smap = synthpop::SourceType(r) == NodeType::kChild ? child_node : person_node;
    const auto& tmap = synthpop::TargetType(r) == NodeType::kChild ? child_node : person_node;
    const CsvTable csv = ReadCsv(dir / ("edges_" + std::string(synthpop::RelationName(r)) + ".csv"));
    std::vector<std::pair<int32_t, int32_t>> pairs;
    pairs.reserve(csv.rows.size());
    for (const auto& row : csv.rows) {
      const auto s = smap.find(ParseInt(row[0]));
      const auto t = tmap.find(ParseInt(row[1]));
      if (s == smap.end() || t == tmap.end()) throw DependencyError("graph edge references an unknown node");
      pairs.emplace_back(s->second, t->second);
    }
    g.relations[static_cast<size_t>(r)] =
        MakeAdjacency(r, g.NumNodes(synthpop::SourceType(r)), g.NumNodes(synthpop::TargetType(r)), pairs);
  }
  if (HexU64(g.SchemaHash()) != schema.at("schema_hash").get<std::string>()) {
    throw DependencyError("graph.schema.json hash mismatch");
  }
  return g;
}

}  // namespace predgap::hetgraph
