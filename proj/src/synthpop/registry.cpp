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
#include "synthpop/registry.hpp"

namespace predgap::synthpop {

std::string_view RelationName(Relation r) {
  switch (r) {
    case Relation::kClassmates: return "classmates";
    case Relation::kParents: return "parents";
    case Relation::kChildren: return "children";
    case Relation::kParentOrChild: return "parent_or_child";
    case Relation::kNeighbors: return "neighbors";
  }
  return "?";
}

Relation ParseRelation(std::string_view name) {
  for (Relation r : kAllRelations) {
    if (RelationName(r) == name) return r;
  }
  throw InvalidArgument("unknown relation '" + std::string(name) + "'");
}

NodeType SourceType(Relation r) {
  switch (r) {
    case Relation::kClassmates:
    case Relation::kParents: return NodeType::kChild;
    default: return NodeType::kPerson;
  }
}

NodeType TargetType(Relation r) {
  switch (r) {
    case Relation::kClassmates:
    case Relation::kChildren: return NodeType::kChild;
    default: return NodeType::kPerson;
  }
}

std::string_view OutcomeModeName(OutcomeMode m) {
  switch (m) {
    case OutcomeMode::kLinear: return "linear";
    case OutcomeMode::kInteraction: return "interaction";
    case OutcomeMode::kNetworkMediated: return "network_mediated";
  }
  return "?";
}

std::string_view PersonRoleName(PersonRole r) {
  switch (r) {
    case PersonRole::kParent: return "parent";
    case PersonRole::kGrandparent: return "grandparent";
    case PersonRole::kResident: return "resident";
  }
  return "?";
}

std::string_view OriginName(int code) {
  static constexpr std::string_view kNames[kNumOrigins] = {
      "Dutch", "Morocco", "Turkey", "Suriname", "Antilles", "Other_Western", "Other_nonWestern"};
  if (code < 0 || code >= kNumOrigins) return "unknown";
  return kNames[code];
}

const std::vector<std::string>& OutcomeTermNames() {
  static const std::vector<std::string> kNames = {
      "female", "male", "father_absent", "mother_absent", "migrant",
      "migration_generation", "disability", "sbo", "wpo", "parent_degree",
      "father_degree", "mother_degree", "parent_income_rank", "father_income_rank",
      "mother_income_rank", "household_income_rank", "grandparent_income_rank_max",
      "class_mean_income_rank", "neighborhood_mean_education",
      "classmates_parent_degree_share", "migrant_neighbor_share_x_migrant",
      "educated_migrant_neighbor_share"};
  return kNames;
}

const std::vector<std::string>& NetworkTermNames() {
  static const std::vector<std::string> kNames = {
      "classmates_parent_degree_share", "migrant_neighbor_share_x_migrant",
      "educated_migrant_neighbor_share"};
  return kNames;
}

namespace {

bool IsKnownTerm(const std::string& name) {
  const auto& names = OutcomeTermNames();
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool IsNetworkTerm(const std::string& name) {
  const auto& names = NetworkTermNames();
  return std::find(names.begin(), names.end(), name) != names.end();
}

void CheckProbability(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string("scenario field '") + field + "' must lie in [0,1]");
  }
}

OutcomeMode ParseOutcomeMode(const std::string& s) {
  if (s == "linear") return OutcomeMode::kLinear;
  if (s == "interaction") return OutcomeMode::kInteraction;
  if (s == "network_mediated") return OutcomeMode::kNetworkMediated;
  throw ConfigError("scenario field 'outcome_mode' must be linear|interaction|network_mediated");
}

}  // namespace

void ScenarioConfig::Validate() const {
  if (n_children < 100) throw ConfigError("scenario field 'n_children' must be >= 100");
  if (n_children > 50'000'000) {
    throw ConfigError("scenario field 'n_children' overflows the id space (max 5e7)");
  }
  if (birth_year_max < birth_year_min) {
    throw ConfigError("scenario field 'birth_year_max' must be >= birth_year_min");
  }
  if (!(mean_class_size >= 2.0)) throw ConfigError("scenario field 'mean_class_size' must be >= 2");
  if (!(class_size_sd >= 0.0)) throw ConfigError("scenario field 'class_size_sd' must be >= 0");
  if (max_classes_per_school < 1) {
    throw ConfigError("scenario field 'max_classes_per_school' must be >= 1");
  }
  if (households_per_neighborhood < 1) {
    throw ConfigError("scenario field 'households_per_neighborhood' must be >= 1");
  }
  if (extra_residents_per_neighborhood < 0) {
    throw ConfigError("scenario field 'extra_residents_per_neighborhood' must be >= 0");
  }
  if (neighbor_cap < 1) throw ConfigError("scenario field 'neighbor_cap' must be >= 1");
  if (neighborhoods_per_municipality < 1) {
    throw ConfigError("scenario field 'neighborhoods_per_municipality' must be >= 1");
  }
  CheckProbability(grandparent_survival_rate, "grandparent_survival_rate");
  CheckProbability(grandparent_same_municipality_rate, "grandparent_same_municipality_rate");
  CheckProbability(father_absence_rate, "father_absence_rate");
  CheckProbability(mother_absence_rate, "mother_absence_rate");
  CheckProbability(ses_sorting, "ses_sorting");
  CheckProbability(migrant_rate, "migrant_rate");
  CheckProbability(income_missing_rate, "income_missing_rate");
  CheckProbability(degree_missing_rate, "degree_missing_rate");
  CheckProbability(gender_missing_rate, "gender_missing_rate");
  CheckProbability(disability_rate, "disability_rate");
  if (!(pension_floor >= 0.0)) throw ConfigError("scenario field 'pension_floor' must be >= 0");
  for (const auto& [name, w] : linear_weights) {
    if (!IsKnownTerm(name) || IsNetworkTerm(name)) {
      throw ConfigError("scenario field 'linear_weights' has unknown individual term '" + name + "'");
    }
    if (!std::isfinite(w)) throw ConfigError("scenario field 'linear_weights." + name + "' is not finite");
  }
  for (const auto& term : interaction_terms) {
    if (term.factors.size() < 2) {
      throw ConfigError("scenario field 'interaction_terms' needs >= 2 factors per term");
    }
    for (const auto& f : term.factors) {
      if (!IsKnownTerm(f)) throw ConfigError("scenario field 'interaction_terms' has unknown factor '" + f + "'");
    }
    if (!std::isfinite(term.weight)) throw ConfigError("scenario field 'interaction_terms.weight' is not finite");
  }
  for (const auto& [name, w] : network_weights) {
    if (!IsNetworkTerm(name)) {
      throw ConfigError("scenario field 'network_weights' has unknown network term '" + name + "'");
    }
    if (!std::isfinite(w)) throw ConfigError("scenario field 'network_weights." + name + "' is not finite");
  }
  if (!std::isfinite(intercept)) throw ConfigError("scenario field 'intercept' is not finite");
}

Json ScenarioConfig::ToJson() const {
  Json j;
  j["n_children"] = n_children;
  j["outcome_mode"] = std::string(OutcomeModeName(outcome_mode));
  j["rng_seed"] = rng_seed;
  j["intercept"] = intercept;
  j["linear_weights"] = Json::object();
  for (const auto& [k, v] : linear_weights) j["linear_weights"][k] = v;
  j["interaction_terms"] = Json::array();
  for (const auto& t : interaction_terms) {
    j["interaction_terms"].push_back(Json{{"factors", t.factors}, {"weight", t.weight}});
  }
  j["network_weights"] = Json::object();
  for (const auto& [k, v] : network_weights) j["network_weights"][k] = v;
  j["birth_year_min"] = birth_year_min;
  j["birth_year_max"] = birth_year_max;
  j["mean_class_size"] = mean_class_size;
  j["class_size_sd"] = class_size_sd;
  j["max_classes_per_school"] = max_classes_per_school;
  j["households_per_neighborhood"] = households_per_neighborhood;
  j["extra_residents_per_neighborhood"] = extra_residents_per_neighborhood;
  j["neighbor_cap"] = neighbor_cap;
  j["neighborhoods_per_municipality"] = neighborhoods_per_municipality;
  j["grandparent_survival_rate"] = grandparent_survival_rate;
  j["grandparent_same_municipality_rate"] = grandparent_same_municipality_rate;
  j["father_absence_rate"] = father_absence_rate;
  j["mother_absence_rate"] = mother_absence_rate;
  j["ses_sorting"] = ses_sorting;
  j["migrant_rate"] = migrant_rate;
  j["income_missing_rate"] = income_missing_rate;
  j["degree_missing_rate"] = degree_missing_rate;
  j["gender_missing_rate"] = gender_missing_rate;
  j["disability_rate"] = disability_rate;
  j["pension_floor"] = pension_floor;
  return j;
}

namespace {

template <typename T>
void ReadField(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("scenario field '") + key + "' has the wrong type");
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::FromJson(const Json& j) {
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
  static const std::set<std::string> kKnown = {
      "n_children", "outcome_mode", "rng_seed", "intercept", "linear_weights",
      "interaction_terms", "network_weights", "birth_year_min", "birth_year_max",
      "mean_class_size", "class_size_sd", "max_classes_per_school",
      "households_per_neighborhood", "extra_residents_per_neighborhood", "neighbor_cap",
      "neighborhoods_per_municipality", "grandparent_survival_rate",
      "grandparent_same_municipality_rate", "father_absence_rate", "mother_absence_rate",
      "ses_sorting", "migrant_rate", "income_missing_rate", "degree_missing_rate",
      "gender_missing_rate", "disability_rate", "pension_floor"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.count(key)) throw ConfigError("unknown scenario field '" + key + "'");
  }
  ScenarioConfig c;
  ReadField(j, "n_children", c.n_children);
  if (j.contains("outcome_mode")) {
    if (!j["outcome_mode"].is_string()) throw ConfigError("scenario field 'outcome_mode' must be a string");
    c.outcome_mode = ParseOutcomeMode(j["outcome_mode"].get<std::string>());
  }
  ReadField(j, "rng_seed", c.rng_seed);
  ReadField(j, "intercept", c.intercept);
  ReadField(j, "linear_weights", c.linear_weights);
  if (j.contains("interaction_terms")) {
    if (!j["interaction_terms"].is_array()) {
      throw ConfigError("scenario field 'interaction_terms' must be an array");
    }
    for (const auto& t : j["interaction_terms"]) {
      InteractionTerm term;
      try {
        term.factors = t.at("factors").get<std::vector<std::string>>();
        term.weight = t.at("weight").get<double>();
      } catch (const Json::exception&) {
        throw ConfigError("scenario field 'interaction_terms' entries need factors[] and weight");
      }
      c.interaction_terms.push_back(std::move(term));
    }
  }
  ReadField(j, "network_weights", c.network_weights);
  ReadField(j, "birth_year_min", c.birth_year_min);
  ReadField(j, "birth_year_max", c.birth_year_max);
  ReadField(j, "mean_class_size", c.mean_class_size);
  ReadField(j, "class_size_sd", c.class_size_sd);
  ReadField(j, "max_classes_per_school", c.max_classes_per_school);
  ReadField(j, "households_per_neighborhood", c.households_per_neighborhood);
  ReadField(j, "extra_residents_per_neighborhood", c.extra_residents_per_neighborhood);
  ReadField(j, "neighbor_cap", c.neighbor_cap);
  ReadField(j, "neighborhoods_per_municipality", c.neighborhoods_per_municipality);
  ReadField(j, "grandparent_survival_rate", c.grandparent_survival_rate);
  ReadField(j, "grandparent_same_municipality_rate", c.grandparent_same_municipality_rate);
  ReadField(j, "father_absence_rate", c.father_absence_rate);
  ReadField(j, "mother_absence_rate", c.mother_absence_rate);
  ReadField(j, "ses_sorting", c.ses_sorting);
  ReadField(j, "migrant_rate", c.migrant_rate);
  ReadField(j, "income_missing_rate", c.income_missing_rate);
  ReadField(j, "degree_missing_rate", c.degree_missing_rate);
  ReadField(j, "gender_missing_rate", c.gender_missing_rate);
  ReadField(j, "disability_rate", c.disability_rate);
  ReadField(j, "pension_floor", c.pension_floor);
  c.Validate();
  return c;
}

std::unordered_map<int64_t, size_t> Registry::PersonIndex() const {
  std::unordered_map<int64_t, size_t> index;
  index.reserve(persons.size());
  for (size_t i = 0; i < persons.size(); ++i) index.emplace(persons[i].person_id, i);
  return index;
}

std::unordered_map<int64_t, size_t> Registry::ChildIndex() const {
  std::unordered_map<int64_t, size_t> index;
  index.reserve(children.size());
  for (size_t i = 0; i < children.size(); ++i) index.emplace(children[i].child_id, i);
  return index;
}

namespace {

[[noreturn]] void Violation(const std::string& what) {
  throw InvariantError("registry invariant violated: " + what);
}

bool IsSymmetric(const EdgeSet& e) {
  std::vector<std::pair<int64_t, int64_t>> fwd = e.pairs;
  std::vector<std::pair<int64_t, int64_t>> rev;
  rev.reserve(fwd.size());
  for (const auto& [a, b] : fwd) rev.emplace_back(b, a);
  std::sort(fwd.begin(), fwd.end());
  std::sort(rev.begin(), rev.end());
  return fwd == rev;
}

}  // namespace

void ValidateRegistry(const Registry& registry) {
  const auto persons = registry.PersonIndex();
  const auto children = registry.ChildIndex();
  if (persons.size() != registry.persons.size()) Violation("duplicate person_id");
  if (children.size() != registry.children.size()) Violation("duplicate child_id");
  const auto& cfg = registry.config;
  for (const auto& c : registry.children) {
    if (c.outcome_university != 0 && c.outcome_university != 1) {
      Violation("child " + std::to_string(c.child_id) + " has a non-binary outcome");
    }
    if (c.birth_year < cfg.birth_year_min || c.birth_year > cfg.birth_year_max) {
      Violation("child " + std::to_string(c.child_id) + " birth_year out of range");
    }
    if (!c.wpo_weight && c.special_education_sbo != 1) {
      Violation("child " + std::to_string(c.child_id) + " has missing WPO weight outside SBO");
    }
    if (c.father_id && !persons.count(*c.father_id)) Violation("unknown father_id");
    if (c.mother_id && !persons.count(*c.mother_id)) Violation("unknown mother_id");
  }
  for (Relation r : kAllRelations) {
    const EdgeSet& e = registry.Edges(r);
    if (e.relation != r) Violation("edge set stored under the wrong relation");
    const auto& src_index = SourceType(r) == NodeType::kChild ? children : persons;
    const auto& dst_index = TargetType(r) == NodeType::kChild ? children : persons;
    for (const auto& [a, b] : e.pairs) {
      if (!src_index.count(a) || !dst_index.count(b)) {
        Violation(std::string(RelationName(r)) + " edge endpoint missing");
      }
      if (SourceType(r) == TargetType(r) && a == b) {
        Violation(std::string(RelationName(r)) + " self-loop");
      }
    }
  }
  for (Relation r : {Relation::kClassmates, Relation::kNeighbors, Relation::kParentOrChild}) {
    if (!IsSymmetric(registry.Edges(r))) Violation(std::string(RelationName(r)) + " is not symmetric");
  }
  {
    auto parents = registry.Edges(Relation::kParents).pairs;
    std::vector<std::pair<int64_t, int64_t>> transposed;
    for (const auto& [a, b] : registry.Edges(Relation::kChildren).pairs) transposed.emplace_back(b, a);
    std::sort(parents.begin(), parents.end());
    std::sort(transposed.begin(), transposed.end());
    if (parents != transposed) Violation("parents and children are not transposes");
  }
}

// ---------------------------------------------------------------------------
// CSV persistence.

namespace {

std::string OptInt(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }
std::string OptId(const std::optional<int64_t>& v) { return v ? std::to_string(*v) : std::string(); }

std::optional<int> ParseOptInt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return static_cast<int>(ParseInt(s));
}
std::optional<int64_t> ParseOptId(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return ParseInt(s);
}

PersonRole ParseRole(const std::string& s) {
  for (PersonRole r : {PersonRole::kParent, PersonRole::kGrandparent, PersonRole::kResident}) {
    if (PersonRoleName(r) == s) return r;
  }
  throw DependencyError("persons.csv: unknown role '" + s + "'");
}

const std::vector<std::string> kChildColumns = {
    "child_id", "birth_year", "gender_male", "migration_generation", "migration_origin",
    "disability", "special_education_sbo", "wpo_weight", "outcome_university", "father_id",
    "mother_id", "school_class_id", "school_id", "school_urbanicity", "neighborhood_id",
    "municipality_id", "household_id", "n_siblings"};

const std::vector<std::string> kPersonColumns = {
    "person_id", "role", "birth_year", "gender_male", "migration_generation",
    "migration_origin", "income", "has_university_degree", "alive", "household_id",
    "neighborhood_id", "municipality_id"};

void CheckHeader(const CsvTable& t, const std::vector<std::string>& expected, const std::string& file) {
  if (t.header != expected) throw DependencyError(file + " has an unexpected header");
}

}  // namespace

void SaveRegistry(const Registry& registry, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter w(dir / "children.csv");
    w.WriteRow(kChildColumns);
    for (const auto& c : registry.children) {
      w.WriteRow({std::to_string(c.child_id), std::to_string(c.birth_year), OptInt(c.gender_male),
                  std::to_string(c.migration_generation), std::to_string(c.migration_origin),
                  std::to_string(c.disability), std::to_string(c.special_education_sbo),
                  FormatOptional(c.wpo_weight), std::to_string(c.outcome_university),
                  OptId(c.father_id), OptId(c.mother_id), std::to_string(c.school_class_id),
                  std::to_string(c.school_id), FormatDouble(c.school_urbanicity),
                  std::to_string(c.neighborhood_id), std::to_string(c.municipality_id),
                  std::to_string(c.household_id), std::to_string(c.n_siblings)});
    }
    w.Close();
  }
  {
    CsvWriter w(dir / "persons.csv");
    w.WriteRow(kPersonColumns);
    for (const auto& p : registry.persons) {
      w.WriteRow({std::to_string(p.person_id), std::string(PersonRoleName(p.role)),
                  std::to_string(p.birth_year), OptInt(p.gender_male),
                  std::to_string(p.migration_generation), std::to_string(p.migration_origin),
                  FormatOptional(p.income), OptInt(p.has_university_degree), p.alive ? "1" : "0",
                  std::to_string(p.household_id), std::to_string(p.neighborhood_id),
                  std::to_string(p.municipality_id)});
    }
    w.Close();
  }
  for (Relation r : kAllRelations) {
    CsvWriter w(dir / ("edges_" + std::string(RelationName(r)) + ".csv"));
    w.WriteRow({"source_id", "target_id"});
    for (const auto& [a, b] : registry.Edges(r).pairs) {
      w.WriteRow({std::to_string(a), std::to_string(b)});
    }
    w.Close();
  }
  WriteJsonFile(dir / "scenario.json", registry.config.ToJson());
}

Registry LoadRegistry(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "children.csv")) {
    throw DependencyError("registry not found in " + dir.string() + " (run `synth` first)");
  }
  Registry reg;
  reg.config = ScenarioConfig::FromJson(ReadJsonFile(dir / "scenario.json"));
  {
    const CsvTable t = ReadCsv(dir / "children.csv");
    CheckHeader(t, kChildColumns, "children.csv");
    reg.children.reserve(t.rows.size());
    for (const auto& row : t.rows) {
      ChildRecord c;
      c.child_id = ParseInt(row[0]);
      c.birth_year = static_cast<int>(ParseInt(row[1]));
      c.gender_male = ParseOptInt(row[2]);
      c.migration_generation = static_cast<int>(ParseInt(row[3]));
      c.migration_origin = static_cast<int>(ParseInt(row[4]));
      c.disability = static_cast<int>(ParseInt(row[5]));
      c.special_education_sbo = static_cast<int>(ParseInt(row[6]));
      c.wpo_weight = ParseOptionalDouble(row[7]);
      c.outcome_university = static_cast<int>(ParseInt(row[8]));
      c.father_id = ParseOptId(row[9]);
      c.mother_id = ParseOptId(row[10]);
      c.school_class_id = ParseInt(row[11]);
      c.school_id = ParseInt(row[12]);
      c.school_urbanicity = ParseDouble(row[13]);
      c.neighborhood_id = ParseInt(row[14]);
      c.municipality_id = ParseInt(row[15]);
      c.household_id = ParseInt(row[16]);
      c.n_siblings = static_cast<int>(ParseInt(row[17]));
      reg.children.push_back(c);
    }
  }
  {
    const CsvTable t = ReadCsv(dir / "persons.csv");
    CheckHeader(t, kPersonColumns, "persons.csv");
    reg.persons.reserve(t.rows.size());
    for (const auto& row : t.rows) {
      PersonRecord p;
      p.person_id = ParseInt(row[0]);
      p.role = ParseRole(row[1]);
      p.birth_year = static_cast<int>(ParseInt(row[2]));
      p.gender_male = ParseOptInt(row[3]);
      p.migration_generation = static_cast<int>(ParseInt(row[4]));
      p.migration_origin = static_cast<int>(ParseInt(row[5]));
      p.income = ParseOptionalDouble(row[6]);
      p.has_university_degree = ParseOptInt(row[7]);
      p.alive = ParseInt(row[8]) != 0;
      p.household_id = ParseInt(row[9]);
      p.neighborhood_id = ParseInt(row[10]);
      p.municipality_id = ParseInt(row[11]);
      reg.persons.push_back(p);
    }
  }
  for (Relation r : kAllRelations) {
    const std::string file = "edges_" + std::string(RelationName(r)) + ".csv";
    const CsvTable t = ReadCsv(dir / file);
    CheckHeader(t, {"source_id", "target_id"}, file);
    EdgeSet& e = reg.edges[static_cast<size_t>(r)];
    e.relation = r;
    e.pairs.reserve(t.rows.size());
    for (const auto& row : t.rows) e.pairs.emplace_back(ParseInt(row[0]), ParseInt(row[1]));
  }
  ValidateRegistry(reg);
  return reg;
}

}  // namespace predgap::synthpop
