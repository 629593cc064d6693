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

#ifndef PREDGAP_FEATURES_FEATURE_TABLE_HPP_
#define PREDGAP_FEATURES_FEATURE_TABLE_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "common/io.hpp"
#include "features/transforms.hpp"
#include "synthpop/registry.hpp"

namespace predgap::features {

// Variable domains. Declaration order is the summary-table row order; the nested
// evaluation order is NestedContextOrder().
enum class ContextGroup : uint8_t { kI, kF, kE, kH, kS, kN };
char GroupLetter(ContextGroup g);
ContextGroup ParseGroup(char letter);

// I -> F -> H -> E -> S -> N.
const std::vector<ContextGroup>& NestedContextOrder();

class ContextSetSpec {
 public:
  // Throws InvalidArgument unless `groups` is a non-empty prefix of the
  // nested sequence.
  explicit ContextSetSpec(std::vector<ContextGroup> groups);
  static ContextSetSpec Prefix(size_t length);
  static ContextSetSpec Full() { return Prefix(6); }
  // Accepts "I,F,H" or a label ("demographics", "nuclear", "household",
  // "extended", "school", "neighborhood"/"full").
  static ContextSetSpec Parse(std::string_view text);

  const std::vector<ContextGroup>& groups() const { return groups_; }
  bool Contains(ContextGroup g) const;
  size_t size() const { return groups_.size(); }
  std::string ToString() const;  // "I,F,H"
  std::string Label() const;     // "+Household"

 private:
  std::vector<ContextGroup> groups_;
};

enum class Transform : uint8_t {
  kNone,
  kMinMax,
  kZScore,
  kLogZScore,
  kRankSample,           // raw income, ranked within the child cohort
  kRankPopulation,       // person-level rank against all registry persons
  kAggRankPopulation,    // mean/min/max/std of population ranks
  kIndicator,            // 1 where the paired column was missing
};
std::string_view TransformName(Transform t);
Transform ParseTransform(std::string_view name);

struct VariableDef {
  std::string name;
  ContextGroup group;
  Transform transform;
  bool always_indicator = false;
};

// The 42 model input variables in summary-table order.
const std::vector<VariableDef>& InputVariables();

// Precomputed peer structure over a registry. Holds references; the
// registry must outlive it.
class RegistryView {
 public:
  explicit RegistryView(const synthpop::Registry& registry);

  const synthpop::Registry& registry() const { return reg_; }
  size_t n_children() const { return reg_.children.size(); }
  // Population income rank per person row (missing when income missing).
  const OptionalColumn& person_rank() const { return person_rank_; }
  const std::vector<std::vector<size_t>>& parents() const { return parents_; }
  const std::vector<std::vector<size_t>>& classmates() const { return classmates_; }
  // Neighbors of each child's parents, excluding the parents (person rows).
  const std::vector<std::vector<size_t>>& neighbor_peers() const { return neighbor_peers_; }
  const std::vector<std::vector<size_t>>& grandparents() const { return grandparents_; }
  const std::vector<std::optional<size_t>>& father() const { return father_; }
  const std::vector<std::optional<size_t>>& mother() const { return mother_; }

 private:
  const synthpop::Registry& reg_;
  OptionalColumn person_rank_;
  std::vector<std::vector<size_t>> parents_;
  std::vector<std::vector<size_t>> classmates_;
  std::vector<std::vector<size_t>> neighbor_peers_;
  std::vector<std::vector<size_t>> grandparents_;
  std::vector<std::optional<size_t>> father_;
  std::vector<std::optional<size_t>> mother_;
};

enum class PeerScope { kClassmates, kNeighbors };
enum class Statistic { kMean, kStd, kShareReporting };
enum class Attribute { kWpoWeight, kIncome, kIncomeRank, kUniversityDegree };

// Per-child statistic over peers' non-missing attribute values. Classmates
// scope with a person attribute aggregates over the classmates' parents.
// Zero peers (or zero reporting peers for mean/std) gives missing.
OptionalColumn AggregateContext(const RegistryView& view, PeerScope scope, Statistic stat,
                                Attribute attribute);

// Raw input values per child, before the model-input transforms: incomes in
// currency units, person ranks already against the population.
std::vector<OptionalColumn> RawInputColumns(const RegistryView& view);

struct FeatureColumn {
  std::string name;
  ContextGroup group = ContextGroup::kI;
  Transform transform = Transform::kNone;
  std::optional<std::string> indicator_of;
  std::string note;  // e.g. "constant" when a scaler saw a constant column
  std::vector<double> values;
};

struct FeatureTable {
  std::vector<int64_t> child_ids;
  std::string context;  // ContextSetSpec::ToString()
  std::vector<FeatureColumn> columns;

  size_t n_rows() const { return child_ids.size(); }
  size_t n_cols() const { return columns.size(); }
  std::vector<std::string> ColumnNames() const;
  const FeatureColumn& Column(std::string_view name) const;
  // Row-major copy of the values (rows = children).
  Eigen::MatrixXd Matrix() const;
  // Hash of (name, group, transform, indicator link) in column order.
  uint64_t SchemaHash() const;
  Json SchemaJson() const;
};

struct FeatureOptions {
  // Adds one-hot migration origin columns (top-k + other) to the I group.
  // Off by default: the base input schema does not contain origin.
  bool include_origin_onehot = false;
  int origin_top_k = 4;
};

// Throws InvalidArgument on an empty context (not constructible) and
// InvariantError if post-conditions fail.
FeatureTable BuildFeatureTable(const synthpop::Registry& registry, const ContextSetSpec& context,
                               const FeatureOptions& options = {});
FeatureTable BuildFeatureTable(const RegistryView& view, const ContextSetSpec& context,
                               const FeatureOptions& options = {});

std::vector<int> Outcomes(const synthpop::Registry& registry);

void SaveFeatureTable(const FeatureTable& table, const std::filesystem::path& dir);
FeatureTable LoadFeatureTable(const std::filesystem::path& dir);

}  // namespace predgap::features

#endif  // PREDGAP_FEATURES_FEATURE_TABLE_HPP_
