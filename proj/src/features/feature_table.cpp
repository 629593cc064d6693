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

#include "features/feature_table.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "common/error.hpp"

namespace predgap::features {

using synthpop::PersonRecord;
using synthpop::Registry;
using synthpop::Relation;

char GroupLetter(ContextGroup g) {
  static constexpr char kLetters[] = {'I', 'F', 'E', 'H', 'S', 'N'};
  return kLetters[static_cast<size_t>(g)];
}

ContextGroup ParseGroup(char letter) {
  switch (letter) {
    case 'I': return ContextGroup::kI;
    case 'F': return ContextGroup::kF;
    case 'E': return ContextGroup::kE;
    case 'H': return ContextGroup::kH;
    case 'S': return ContextGroup::kS;
    case 'N': return ContextGroup::kN;
  }
  throw InvalidArgument(std::string("unknown context group '") + letter + "'");
}

const std::vector<ContextGroup>& NestedContextOrder() {
  static const std::vector<ContextGroup> kOrder = {ContextGroup::kI, ContextGroup::kF,
                                                   ContextGroup::kH, ContextGroup::kE,
                                                   ContextGroup::kS, ContextGroup::kN};
  return kOrder;
}

ContextSetSpec::ContextSetSpec(std::vector<ContextGroup> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw InvalidArgument("context set is empty");
  const auto& order = NestedContextOrder();
  if (groups_.size() > order.size() || !std::equal(groups_.begin(), groups_.end(), order.begin())) {
    throw InvalidArgument("context set must be a prefix of I,F,H,E,S,N");
  }
}

ContextSetSpec ContextSetSpec::Prefix(size_t length) {
  const auto& order = NestedContextOrder();
  if (length == 0 || length > order.size()) throw InvalidArgument("context prefix length out of range");
  return ContextSetSpec(std::vector<ContextGroup>(order.begin(), order.begin() + length));
}

ContextSetSpec ContextSetSpec::Parse(std::string_view text) {
  static const std::map<std::string, size_t, std::less<>> kLabels = {
      {"demographics", 1}, {"nuclear", 2}, {"household", 3}, {"extended", 4},
      {"school", 5}, {"neighborhood", 6}, {"full", 6}};
  if (auto it = kLabels.find(text); it != kLabels.end()) return Prefix(it->second);
  std::vector<ContextGroup> groups;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view token = text.substr(pos, comma - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (token.size() != 1) throw InvalidArgument("cannot parse context set '" + std::string(text) + "'");
    groups.push_back(ParseGroup(token[0]));
    pos = comma + 1;
  }
  return ContextSetSpec(std::move(groups));
}

bool ContextSetSpec::Contains(ContextGroup g) const {
  return std::find(groups_.begin(), groups_.end(), g) != groups_.end();
}

std::string ContextSetSpec::ToString() const {
  std::string out;
  for (size_t i = 0; i < groups_.size(); ++i) {
    if (i) out.push_back(',');
    out.push_back(GroupLetter(groups_[i]));
  }
  return out;
}

std::string ContextSetSpec::Label() const {
  static constexpr const char* kLabels[] = {"Demographics", "+Nuclear family", "+Household",
                                            "+Extended family", "+School", "+Neighborhood"};
  return kLabels[groups_.size() - 1];
}

std::string_view TransformName(Transform t) {
  switch (t) {
    case Transform::kNone: return "none";
    case Transform::kMinMax: return "minmax";
    case Transform::kZScore: return "zscore";
    case Transform::kLogZScore: return "log_zscore";
    case Transform::kRankSample: return "rank_sample";
    case Transform::kRankPopulation: return "rank_population";
    case Transform::kAggRankPopulation: return "agg_rank_population";
    case Transform::kIndicator: return "indicator";
  }
  return "?";
}

Transform ParseTransform(std::string_view name) {
  for (Transform t : {Transform::kNone, Transform::kMinMax, Transform::kZScore, Transform::kLogZScore,
                      Transform::kRankSample, Transform::kRankPopulation,
                      Transform::kAggRankPopulation, Transform::kIndicator}) {
    if (TransformName(t) == name) return t;
  }
  throw DependencyError("unknown transform '" + std::string(name) + "'");
}

const std::vector<VariableDef>& InputVariables() {
  using G = ContextGroup;
  using T = Transform;
  static const std::vector<VariableDef> kVars = {
      {"I: Migration generation", G::kI, T::kMinMax},
      {"I: Gender (male)", G::kI, T::kNone},
      {"I: Birth year", G::kI, T::kMinMax},
      {"I: Disability indicator", G::kI, T::kNone},
      {"I: Special education (SBO)", G::kI, T::kNone},
      {"F: WPO weight", G::kF, T::kNone, true},
      {"F: Number of siblings", G::kF, T::kMinMax},
      {"F: Father univ. degree", G::kF, T::kNone, true},
      {"F: Mother univ. degree", G::kF, T::kNone, true},
      {"F: Father's income", G::kF, T::kRankSample},
      {"F: Mother's income", G::kF, T::kRankSample},
      {"F: Father's income rank", G::kF, T::kRankPopulation},
      {"F: Mother's income rank", G::kF, T::kRankPopulation},
      {"F: Father known", G::kF, T::kNone},
      {"F: Mother known", G::kF, T::kNone},
      {"E: Known grandparents", G::kE, T::kMinMax},
      {"E: Min grandparent income rank", G::kE, T::kAggRankPopulation},
      {"E: Max grandparent income rank", G::kE, T::kAggRankPopulation},
      {"E: Min grandparent income", G::kE, T::kRankSample},
      {"E: Max grandparent income", G::kE, T::kRankSample},
      {"E: Grandparents in municipality", G::kE, T::kNone},
      {"H: Mean household income", G::kH, T::kRankSample},
      {"H: Total household income", G::kH, T::kRankSample},
      {"H: Mean household income rank", G::kH, T::kAggRankPopulation},
      {"H: Total household income rank", G::kH, T::kRankSample},
      {"H: Number of earners", G::kH, T::kMinMax},
      {"S: Class size", G::kS, T::kZScore},
      {"S: Average class size", G::kS, T::kZScore},
      {"S: School urbanicity", G::kS, T::kLogZScore},
      {"S: Mean WPO weight (s)", G::kS, T::kNone},
      {"S: std. WPO weight (s)", G::kS, T::kNone},
      {"S: Mean income (s)", G::kS, T::kRankSample},
      {"S: std. income (s)", G::kS, T::kRankSample},
      {"S: Mean income rank (s)", G::kS, T::kAggRankPopulation},
      {"S: std. income rank (s)", G::kS, T::kAggRankPopulation},
      {"S: Share income reported (s)", G::kS, T::kNone},
      {"N: Mean income (n)", G::kN, T::kRankSample},
      {"N: std. income (n)", G::kN, T::kRankSample},
      {"N: Mean income rank (n)", G::kN, T::kAggRankPopulation},
      {"N: std. income rank (n)", G::kN, T::kAggRankPopulation},
      {"N: Mean education (n)", G::kN, T::kNone},
      {"N: std. education (n)", G::kN, T::kNone},
  };
  return kVars;
}

// ---------------------------------------------------------------------------

RegistryView::RegistryView(const Registry& registry) : reg_(registry) {
  const size_t n = reg_.children.size();
  const size_t np = reg_.persons.size();
  const auto person_index = reg_.PersonIndex();
  const auto child_index = reg_.ChildIndex();

  OptionalColumn incomes(np);
  for (size_t k = 0; k < np; ++k) incomes[k] = reg_.persons[k].income;
  const bool any = std::any_of(incomes.begin(), incomes.end(), [](const auto& v) { return v.has_value(); });
  person_rank_ = any ? RankTransform(incomes) : OptionalColumn(np);

  auto lookup = [&](const std::optional<int64_t>& id) -> std::optional<size_t> {
    if (!id) return std::nullopt;
    auto it = person_index.find(*id);
    if (it == person_index.end()) throw InvariantError("unknown parent id " + std::to_string(*id));
    return it->second;
  };
  father_.resize(n);
  mother_.resize(n);
  parents_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    father_[i] = lookup(reg_.children[i].father_id);
    mother_[i] = lookup(reg_.children[i].mother_id);
    if (father_[i]) parents_[i].push_back(*father_[i]);
    if (mother_[i]) parents_[i].push_back(*mother_[i]);
  }

  classmates_.resize(n);
  for (const auto& [a, b] : reg_.Edges(Relation::kClassmates).pairs) {
    classmates_[child_index.at(b)].push_back(child_index.at(a));
  }
  for (auto& list : classmates_) std::sort(list.begin(), list.end());

  std::vector<std::vector<size_t>> person_neighbors(np);
  for (const auto& [a, b] : reg_.Edges(Relation::kNeighbors).pairs) {
    person_neighbors[person_index.at(b)].push_back(person_index.at(a));
  }
  std::vector<std::vector<size_t>> person_grandparents(np);
  for (const auto& [a, b] : reg_.Edges(Relation::kParentOrChild).pairs) {
    const size_t ia = person_index.at(a);
    const size_t ib = person_index.at(b);
    if (reg_.persons[ib].role == synthpop::PersonRole::kGrandparent &&
        reg_.persons[ia].role == synthpop::PersonRole::kParent) {
      person_grandparents[ia].push_back(ib);
    }
  }

  neighbor_peers_.resize(n);
  grandparents_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<size_t>& peers = neighbor_peers_[i];
    for (size_t p : parents_[i]) {
      peers.insert(peers.end(), person_neighbors[p].begin(), person_neighbors[p].end());
      grandparents_[i].insert(grandparents_[i].end(), person_grandparents[p].begin(),
                              person_grandparents[p].end());
    }
    std::sort(peers.begin(), peers.end());
    peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
    std::erase_if(peers, [&](size_t k) {
      return std::find(parents_[i].begin(), parents_[i].end(), k) != parents_[i].end();
    });
    std::sort(grandparents_[i].begin(), grandparents_[i].end());
  }
}

namespace {

std::optional<double> PersonAttribute(const RegistryView& view, size_t person, Attribute attribute) {
  const PersonRecord& p = view.registry().persons[person];
  switch (attribute) {
    case Attribute::kIncome: return p.income;
    case Attribute::kIncomeRank: return view.person_rank()[person];
    case Attribute::kUniversityDegree:
      if (!p.has_university_degree) return std::nullopt;
      return static_cast<double>(*p.has_university_degree);
    case Attribute::kWpoWeight: break;
  }
  throw InvalidArgument("attribute is not a person attribute");
}

std::optional<double> Summarize(const std::vector<double>& values, size_t peers, Statistic stat) {
  if (peers == 0) return std::nullopt;
  if (stat == Statistic::kShareReporting) {
    return static_cast<double>(values.size()) / static_cast<double>(peers);
  }
  if (values.empty()) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (stat == Statistic::kMean) return mean;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

}  // namespace

OptionalColumn AggregateContext(const RegistryView& view, PeerScope scope, Statistic stat,
                                Attribute attribute) {
  const size_t n = view.n_children();
  const auto& children = view.registry().children;
  OptionalColumn out(n);
  std::vector<double> values;
  for (size_t i = 0; i < n; ++i) {
    values.clear();
    size_t peers = 0;
    if (scope == PeerScope::kClassmates) {
      for (size_t j : view.classmates()[i]) {
        if (attribute == Attribute::kWpoWeight) {
          ++peers;
          if (children[j].wpo_weight) values.push_back(*children[j].wpo_weight);
          continue;
        }
        for (size_t p : view.parents()[j]) {
          ++peers;
          if (auto v = PersonAttribute(view, p, attribute)) values.push_back(*v);
        }
      }
    } else {
      if (attribute == Attribute::kWpoWeight) {
        throw InvalidArgument("WPO weight is not defined for neighbor peers");
      }
      for (size_t p : view.neighbor_peers()[i]) {
        ++peers;
        if (auto v = PersonAttribute(view, p, attribute)) values.push_back(*v);
      }
    }
    out[i] = Summarize(values, peers, stat);
  }
  return out;
}

std::vector<OptionalColumn> RawInputColumns(const RegistryView& view) {
  const auto& reg = view.registry();
  const size_t n = view.n_children();
  const auto& persons = reg.persons;
  const auto& ranks = view.person_rank();
  std::vector<OptionalColumn> cols(InputVariables().size(), OptionalColumn(n));
  auto col = [&](std::string_view name) -> OptionalColumn& {
    const auto& vars = InputVariables();
    for (size_t k = 0; k < vars.size(); ++k) {
      if (vars[k].name == name) return cols[k];
    }
    throw InvalidArgument("unknown input variable");
  };

  // Class and school sizes.
  std::map<int64_t, int64_t> class_size;
  std::map<int64_t, std::set<int64_t>> school_classes;
  for (const auto& c : reg.children) {
    ++class_size[c.school_class_id];
    school_classes[c.school_id].insert(c.school_class_id);
  }
  std::map<int64_t, double> school_avg;
  for (const auto& [school, classes] : school_classes) {
    double sum = 0.0;
    for (int64_t cl : classes) sum += static_cast<double>(class_size[cl]);
    school_avg[school] = sum / static_cast<double>(classes.size());
  }

  for (size_t i = 0; i < n; ++i) {
    const auto& c = reg.children[i];
    col("I: Migration generation")[i] = c.migration_generation;
    if (c.gender_male) col("I: Gender (male)")[i] = *c.gender_male;
    col("I: Birth year")[i] = c.birth_year;
    col("I: Disability indicator")[i] = c.disability;
    col("I: Special education (SBO)")[i] = c.special_education_sbo;

    col("F: WPO weight")[i] = c.wpo_weight;
    col("F: Number of siblings")[i] = c.n_siblings;
    const auto& father = view.father()[i];
    const auto& mother = view.mother()[i];
    if (father) {
      const PersonRecord& p = persons[*father];
      if (p.has_university_degree) col("F: Father univ. degree")[i] = *p.has_university_degree;
      col("F: Father's income")[i] = p.income;
      col("F: Father's income rank")[i] = ranks[*father];
    }
    if (mother) {
      const PersonRecord& p = persons[*mother];
      if (p.has_university_degree) col("F: Mother univ. degree")[i] = *p.has_university_degree;
      col("F: Mother's income")[i] = p.income;
      col("F: Mother's income rank")[i] = ranks[*mother];
    }
    col("F: Father known")[i] = father ? 1.0 : 0.0;
    col("F: Mother known")[i] = mother ? 1.0 : 0.0;

    const auto& gps = view.grandparents()[i];
    col("E: Known grandparents")[i] = static_cast<double>(gps.size());
    std::optional<double> rmin, rmax, imin, imax;
    size_t local = 0;
    for (size_t g : gps) {
      if (const auto r = ranks[g]) {
        rmin = rmin ? std::min(*rmin, *r) : *r;
        rmax = rmax ? std::max(*rmax, *r) : *r;
      }
      if (const auto inc = persons[g].income) {
        imin = imin ? std::min(*imin, *inc) : *inc;
        imax = imax ? std::max(*imax, *inc) : *inc;
      }
      if (persons[g].municipality_id == c.municipality_id) ++local;
    }
    col("E: Min grandparent income rank")[i] = rmin;
    col("E: Max grandparent income rank")[i] = rmax;
    col("E: Min grandparent income")[i] = imin;
    col("E: Max grandparent income")[i] = imax;
    if (!gps.empty()) {
      col("E: Grandparents in municipality")[i] =
          static_cast<double>(local) / static_cast<double>(gps.size());
    }

    double total = 0.0;
    double rank_sum = 0.0;
    int reporting = 0;
    int earners = 0;
    for (size_t p : view.parents()[i]) {
      if (!persons[p].income) continue;
      total += *persons[p].income;
      rank_sum += *ranks[p];
      ++reporting;
      if (*persons[p].income > 0.0) ++earners;
    }
    if (reporting > 0) {
      col("H: Mean household income")[i] = total / reporting;
      col("H: Total household income")[i] = total;
      col("H: Mean household income rank")[i] = rank_sum / reporting;
      col("H: Total household income rank")[i] = rank_sum;
      col("H: Number of earners")[i] = earners;
    }

    col("S: Class size")[i] = static_cast<double>(class_size[c.school_class_id]);
    col("S: Average class size")[i] = school_avg[c.school_id];
    col("S: School urbanicity")[i] = c.school_urbanicity;
  }

  using A = Attribute;
  using P = PeerScope;
  using St = Statistic;
  col("S: Mean WPO weight (s)") = AggregateContext(view, P::kClassmates, St::kMean, A::kWpoWeight);
  col("S: std. WPO weight (s)") = AggregateContext(view, P::kClassmates, St::kStd, A::kWpoWeight);
  col("S: Mean income (s)") = AggregateContext(view, P::kClassmates, St::kMean, A::kIncome);
  col("S: std. income (s)") = AggregateContext(view, P::kClassmates, St::kStd, A::kIncome);
  col("S: Mean income rank (s)") = AggregateContext(view, P::kClassmates, St::kMean, A::kIncomeRank);
  col("S: std. income rank (s)") = AggregateContext(view, P::kClassmates, St::kStd, A::kIncomeRank);
  col("S: Share income reported (s)") =
      AggregateContext(view, P::kClassmates, St::kShareReporting, A::kIncome);
  col("N: Mean income (n)") = AggregateContext(view, P::kNeighbors, St::kMean, A::kIncome);
  col("N: std. income (n)") = AggregateContext(view, P::kNeighbors, St::kStd, A::kIncome);
  col("N: Mean income rank (n)") = AggregateContext(view, P::kNeighbors, St::kMean, A::kIncomeRank);
  col("N: std. income rank (n)") = AggregateContext(view, P::kNeighbors, St::kStd, A::kIncomeRank);
  col("N: Mean education (n)") = AggregateContext(view, P::kNeighbors, St::kMean, A::kUniversityDegree);
  col("N: std. education (n)") = AggregateContext(view, P::kNeighbors, St::kStd, A::kUniversityDegree);
  return cols;
}

// ---------------------------------------------------------------------------

std::vector<std::string> FeatureTable::ColumnNames() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

const FeatureColumn& FeatureTable::Column(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw InvalidArgument("feature column '" + std::string(name) + "' not found");
}

Eigen::MatrixXd FeatureTable::Matrix() const {
  Eigen::MatrixXd m(n_rows(), n_cols());
  for (size_t j = 0; j < columns.size(); ++j) {
    for (size_t i = 0; i < n_rows(); ++i) m(i, j) = columns[j].values[i];
  }
  return m;
}

uint64_t FeatureTable::SchemaHash() const {
  std::string key;
  for (const auto& c : columns) {
    key += c.name;
    key.push_back('\x1f');
    key.push_back(GroupLetter(c.group));
    key += TransformName(c.transform);
    key.push_back('\x1f');
    key += c.indicator_of.value_or("");
    key.push_back('\x1e');
  }
  return Fnv1a64(key);
}

Json FeatureTable::SchemaJson() const {
  Json j;
  j["context"] = context;
  j["n_rows"] = n_rows();
  j["schema_hash"] = HexU64(SchemaHash());
  j["columns"] = Json::array();
  for (const auto& c : columns) {
    Json col;
    col["name"] = c.name;
    col["group"] = std::string(1, GroupLetter(c.group));
    col["transform"] = std::string(TransformName(c.transform));
    col["indicator_of"] = c.indicator_of ? Json(*c.indicator_of) : Json(nullptr);
    col["note"] = c.note;
    j["columns"].push_back(col);
  }
  return j;
}

namespace {

// Applies the model-input transform. Constant columns (scalers undefined)
// are zeroed and noted rather than dropped so the schema stays fixed.
OptionalColumn ApplyTransform(const OptionalColumn& raw, Transform t, std::string& note) {
  const bool any = std::any_of(raw.begin(), raw.end(), [](const auto& v) { return v.has_value(); });
  if (!any) {
    note = "all missing";
    return raw;
  }
  try {
    switch (t) {
      case Transform::kMinMax: return MinMaxScale(raw);
      case Transform::kZScore: return ZScore(raw);
      case Transform::kLogZScore: return ZScore(LogTransform(raw));
      case Transform::kRankSample: return RankTransform(raw);
      default: return raw;
    }
  } catch (const InvalidArgument&) {
    note = "constant";
    OptionalColumn out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
      if (raw[i]) out[i] = 0.0;
    }
    return out;
  }
}

void AppendWithIndicator(FeatureTable& table, const std::string& name, ContextGroup group,
                         Transform transform, bool always_indicator, const OptionalColumn& values,
                         const std::string& note) {
  const size_t n = values.size();
  const bool any_missing = std::any_of(values.begin(), values.end(), [](const auto& v) { return !v; });
  const double fill = Median(values).value_or(0.0);
  FeatureColumn col;
  col.name = name;
  col.group = group;
  col.transform = transform;
  col.note = note;
  col.values.resize(n);
  for (size_t i = 0; i < n; ++i) col.values[i] = values[i].value_or(fill);
  table.columns.push_back(std::move(col));
  if (always_indicator || any_missing) {
    FeatureColumn ind;
    ind.name = name + " (missing)";
    ind.group = group;
    ind.transform = Transform::kIndicator;
    ind.indicator_of = name;
    ind.values.resize(n);
    for (size_t i = 0; i < n; ++i) ind.values[i] = values[i] ? 0.0 : 1.0;
    table.columns.push_back(std::move(ind));
  }
}

}  // namespace

FeatureTable BuildFeatureTable(const Registry& registry, const ContextSetSpec& context,
                               const FeatureOptions& options) {
  const RegistryView view(registry);
  return BuildFeatureTable(view, context, options);
}

FeatureTable BuildFeatureTable(const RegistryView& view, const ContextSetSpec& context,
                               const FeatureOptions& options) {
  const auto& reg = view.registry();
  const size_t n = view.n_children();
  if (n == 0) throw InvalidArgument("registry has no children");
  FeatureTable table;
  table.context = context.ToString();
  table.child_ids.reserve(n);
  for (const auto& c : reg.children) table.child_ids.push_back(c.child_id);

  const auto raw = RawInputColumns(view);
  const auto& vars = InputVariables();
  for (size_t k = 0; k < vars.size(); ++k) {
    const VariableDef& def = vars[k];
    if (!context.Contains(def.group)) continue;
    std::string note;
    const OptionalColumn values = ApplyTransform(raw[k], def.transform, note);
    AppendWithIndicator(table, def.name, def.group, def.transform, def.always_indicator, values, note);
    if (def.name == "I: Special education (SBO)" && options.include_origin_onehot) {
      std::vector<int64_t> counts(synthpop::kNumOrigins, 0);
      for (const auto& c : reg.children) ++counts[c.migration_origin];
      std::vector<int> order(synthpop::kNumOrigins);
      for (int o = 0; o < synthpop::kNumOrigins; ++o) order[o] = o;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });
      std::vector<int> top(order.begin(), order.begin() + std::min(options.origin_top_k, synthpop::kNumOrigins));
      std::sort(top.begin(), top.end());
      for (int o : top) {
        OptionalColumn v(n);
        for (size_t i = 0; i < n; ++i) v[i] = reg.children[i].migration_origin == o ? 1.0 : 0.0;
        AppendWithIndicator(table, "I: origin_" + std::string(synthpop::OriginName(o)), ContextGroup::kI,
                            Transform::kNone, false, v, "one-hot");
      }
      OptionalColumn other(n);
      for (size_t i = 0; i < n; ++i) {
        other[i] = std::find(top.begin(), top.end(), reg.children[i].migration_origin) == top.end() ? 1.0 : 0.0;
      }
      AppendWithIndicator(table, "I: origin_other", ContextGroup::kI, Transform::kNone, false, other, "one-hot");
    }
  }

  for (const auto& col : table.columns) {
    if (col.values.size() != n) throw InvariantError("feature column length mismatch: " + col.name);
    for (double v : col.values) {
      if (!std::isfinite(v)) throw InvariantError("non-finite value in feature column " + col.name);
    }
    if (col.transform == Transform::kRankSample && col.note.empty()) {
      for (double v : col.values) {
        if (!(v > 0.0 && v <= 1.0)) throw InvariantError("rank column outside (0,1]: " + col.name);
      }
    }
  }
  return table;
}

std::vector<int> Outcomes(const Registry& registry) {
  std::vector<int> y;
  y.reserve(registry.children.size());
  for (const auto& c : registry.children) y.push_back(c.outcome_university);
  return y;
}

void SaveFeatureTable(const FeatureTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  CsvWriter w(dir / "features.csv");
  std::vector<std::string> header = {"child_id"};
  for (const auto& c : table.columns) header.push_back(c.name);
  w.WriteRow(header);
  std::vector<std::string> row(header.size());
  for (size_t i = 0; i < table.n_rows(); ++i) {
    row[0] = std::to_string(table.child_ids[i]);
    for (size_t j = 0; j < table.columns.size(); ++j) row[j + 1] = FormatDouble(table.columns[j].values[i]);
    w.WriteRow(row);
  }
  w.Close();
  WriteJsonFile(dir / "features.schema.json", table.SchemaJson());
}

FeatureTable LoadFeatureTable(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "features.schema.json")) {
    throw DependencyError("feature table not found in " + dir.string() + " (run `prep` first)");
  }
  const Json schema = ReadJsonFile(dir / "features.schema.json");
  const CsvTable csv = ReadCsv(dir / "features.csv");
  FeatureTable table;
  table.context = schema.at("context").get<std::string>();
  const auto& cols = schema.at("columns");
  if (csv.header.size() != cols.size() + 1) throw DependencyError("features.csv does not match its schema");
  for (size_t j = 0; j < cols.size(); ++j) {
    FeatureColumn c;
    c.name = cols[j].at("name").get<std::string>();
    if (csv.header[j + 1] != c.name) throw DependencyError("features.csv column order differs from schema");
    c.group = ParseGroup(cols[j].at("group").get<std::string>().at(0));
    c.transform = ParseTransform(cols[j].at("transform").get<std::string>());
    if (!cols[j].at("indicator_of").is_null()) c.indicator_of = cols[j].at("indicator_of").get<std::string>();
    c.note = cols[j].at("note").get<std::string>();
    c.values.reserve(csv.rows.size());
    table.columns.push_back(std::move(c));
  }
  for (const auto& row : csv.rows) {
    table.child_ids.push_back(ParseInt(row[0]));
    for (size_t j = 0; j < table.columns.size(); ++j) table.columns[j].values.push_back(ParseDouble(row[j + 1]));
  }
  if (HexU64(table.SchemaHash()) != schema.at("schema_hash").get<std::string>()) {
    throw DependencyError("features.schema.json hash mismatch");
  }
  return table;
}

}  // namespace predgap::features
