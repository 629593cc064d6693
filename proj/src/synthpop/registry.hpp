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

#ifndef PREDGAP_SYNTHPOP_REGISTRY_HPP_
#define PREDGAP_SYNTHPOP_REGISTRY_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "common/io.hpp"

namespace predgap::synthpop {

enum class NodeType : uint8_t { kChild = 0, kPerson = 1 };

// Declaration order is the canonical relation order used everywhere a
// relation list is serialized or concatenated.
enum class Relation : uint8_t {
  kClassmates = 0,     // child -> child
  kParents = 1,        // child -> person (pairs are (child, parent))
  kChildren = 2,       // person -> child (pairs are (parent, child))
  kParentOrChild = 3,  // person -> person (parent <-> grandparent)
  kNeighbors = 4,      // person -> person
};
inline constexpr size_t kNumRelations = 5;
inline constexpr std::array<Relation, kNumRelations> kAllRelations = {
    Relation::kClassmates, Relation::kParents, Relation::kChildren,
    Relation::kParentOrChild, Relation::kNeighbors};

std::string_view RelationName(Relation r);
Relation ParseRelation(std::string_view name);
NodeType SourceType(Relation r);
NodeType TargetType(Relation r);

enum class OutcomeMode : uint8_t { kLinear, kInteraction, kNetworkMediated };
std::string_view OutcomeModeName(OutcomeMode m);

enum class PersonRole : uint8_t { kParent, kGrandparent, kResident };
std::string_view PersonRoleName(PersonRole r);

// Migration origin codes; 0 is native.
inline constexpr int kNumOrigins = 7;
std::string_view OriginName(int code);

struct PersonRecord {
  int64_t person_id = 0;
  PersonRole role = PersonRole::kResident;
  int birth_year = 0;
  std::optional<int> gender_male;
  int migration_generation = 0;
  int migration_origin = 0;
  std::optional<double> income;
  std::optional<int> has_university_degree;
  bool alive = true;
  int64_t household_id = -1;
  int64_t neighborhood_id = -1;  // -1 when not resident (deceased)
  int64_t municipality_id = -1;
};

struct ChildRecord {
  int64_t child_id = 0;
  int birth_year = 0;
  std::optional<int> gender_male;
  int migration_generation = 0;
  int migration_origin = 0;
  int disability = 0;
  int special_education_sbo = 0;
  std::optional<double> wpo_weight;
  int outcome_university = 0;
  std::optional<int64_t> father_id;
  std::optional<int64_t> mother_id;
  int64_t school_class_id = 0;
  int64_t school_id = 0;
  double school_urbanicity = 0.0;
  int64_t neighborhood_id = 0;
  int64_t municipality_id = 0;
  int64_t household_id = 0;
  int n_siblings = 0;
};

struct EdgeSet {
  Relation relation = Relation::kClassmates;
  std::vector<std::pair<int64_t, int64_t>> pairs;  // (source_id, target_id)
};

struct InteractionTerm {
  std::vector<std::string> factors;
  double weight = 0.0;
};

struct ScenarioConfig {
  int64_t n_children = 10000;
  OutcomeMode outcome_mode = OutcomeMode::kLinear;
  uint64_t rng_seed = 7;

  // Outcome logit. Binary terms enter as 0/1, continuous terms as z-scores
  // over the cohort; see OutcomeTermNames().
  double intercept = 0.0;
  std::map<std::string, double> linear_weights;
  std::vector<InteractionTerm> interaction_terms;
  std::map<std::string, double> network_weights;

  // Structure.
  int birth_year_min = 1997;
  int birth_year_max = 2000;
  double mean_class_size = 24.0;
  double class_size_sd = 6.0;
  int max_classes_per_school = 4;
  int households_per_neighborhood = 40;
  int extra_residents_per_neighborhood = 20;
  int neighbor_cap = 12;
  int neighborhoods_per_municipality = 8;
  double grandparent_survival_rate = 0.65;
  double grandparent_same_municipality_rate = 0.5;
  double father_absence_rate = 0.05;
  double mother_absence_rate = 0.0075;
  double ses_sorting = 0.5;
  double migrant_rate = 0.2;
  double income_missing_rate = 0.02;
  double degree_missing_rate = 0.4;
  double gender_missing_rate = 0.0005;
  double disability_rate = 0.022;
  double pension_floor = 12000.0;

  // Throws ConfigError naming the offending field.
  void Validate() const;
  Json ToJson() const;
  static ScenarioConfig FromJson(const Json& j);
};

// Names accepted in linear_weights, interaction factors and network_weights.
const std::vector<std::string>& OutcomeTermNames();
const std::vector<std::string>& NetworkTermNames();

struct Registry {
  ScenarioConfig config;
  std::vector<PersonRecord> persons;
  std::vector<ChildRecord> children;
  std::array<EdgeSet, kNumRelations> edges;

  const EdgeSet& Edges(Relation r) const { return edges[static_cast<size_t>(r)]; }

  // id -> row index maps.
  std::unordered_map<int64_t, size_t> PersonIndex() const;
  std::unordered_map<int64_t, size_t> ChildIndex() const;
};

// Checks id uniqueness, edge endpoint existence, Classmates/Neighbors/
// ParentOrChild symmetry, Parents/Children transpose, no self-loops and the
// record-level invariants. Throws InvariantError with the first violation.
void ValidateRegistry(const Registry& registry);

void SaveRegistry(const Registry& registry, const std::filesystem::path& dir);
Registry LoadRegistry(const std::filesystem::path& dir);

Registry GenerateRegistry(const ScenarioConfig& config);

// Per-child values of every outcome term (binary as 0/1, continuous
// z-scored), computed from observable registry fields. Exposed so the
// generating logit can be reproduced in tests.
std::map<std::string, std::vector<double>> ComputeOutcomeTerms(const Registry& registry);
std::vector<double> OutcomeLogit(const Registry& registry);

}  // namespace predgap::synthpop

#endif  // PREDGAP_SYNTHPOP_REGISTRY_HPP_
