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
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "features/transforms.hpp"
#include "synthpop/registry.hpp"

namespace predgap::synthpop {

namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double Logit(double p) { return std::log(p / (1.0 - p)); }

// Rate shifted on the logit scale; exact 0 and 1 stay degenerate.
double ShiftedRate(double rate, double shift) {
  if (rate <= 0.0) return 0.0;
  if (rate >= 1.0) return 1.0;
  return Sigmoid(Logit(rate) + shift);
}

int DrawCategorical(Rng& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.Uniform() * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

struct HouseholdLatent {
  double ses = 0.0;
  bool migrant = false;
  int origin = 0;
};

class Generator {
 public:
  explicit Generator(const ScenarioConfig& cfg) : cfg_(cfg), rng_(cfg.rng_seed) {}

  Registry Run() {
    reg_.config = cfg_;
    MakeNeighborhoods();
    MakeHouseholds();
    MakeGrandparents();
    MakeResidents();
    MakeClasses();
    MakeEdges();
    DrawOutcomes();
    return std::move(reg_);
  }

 private:
  int64_t NextPersonId() { return static_cast<int64_t>(reg_.persons.size()) + 1; }

  std::optional<double> DrawIncome(double log_mean, double log_sd, double zero_rate) {
    if (rng_.Bernoulli(cfg_.income_missing_rate)) {
      // Consume the same number of draws as the non-missing path.
      rng_.Normal();
      rng_.Uniform();
      rng_.Uniform();
      return std::nullopt;
    }
    const double z = rng_.Normal();
    const double u = rng_.Uniform();
    const double v = rng_.Uniform();
    if (u < 0.01) return -std::round(5000.0 * v);
    if (u < 0.01 + zero_rate) return 0.0;
    return std::round(std::exp(log_mean + log_sd * z));
  }

  std::optional<int> ObserveDegree(bool truth, double missing_rate) {
    if (rng_.Bernoulli(missing_rate)) return std::nullopt;
    return truth ? 1 : 0;
  }

  std::optional<int> DrawGender(int value) {
    if (rng_.Bernoulli(cfg_.gender_missing_rate)) return std::nullopt;
    return value;
  }

  void MakeNeighborhoods() {
    const int64_t n = cfg_.n_children;
    n_neighborhoods_ = (n + cfg_.households_per_neighborhood - 1) / cfg_.households_per_neighborhood;
    nb_ses_.resize(n_neighborhoods_);
    nb_migrant_shift_.resize(n_neighborhoods_);
    for (int64_t k = 0; k < n_neighborhoods_; ++k) {
      nb_ses_[k] = rng_.Normal();
      nb_migrant_shift_[k] = rng_.Normal(0.0, 0.5);
    }
  }

  int64_t Municipality(int64_t neighborhood) const {
    return neighborhood / cfg_.neighborhoods_per_municipality;
  }

  void MakeHouseholds() {
    static constexpr double kOriginWeights[] = {0.0, 0.22, 0.22, 0.18, 0.08, 0.15, 0.15};
    static constexpr double kSiblingWeights[] = {0.12, 0.40, 0.28, 0.12, 0.05, 0.02, 0.01};
    const double s = cfg_.ses_sorting;
    const double rest = std::sqrt(1.0 - s * s);
    const int64_t n = cfg_.n_children;
    latent_.resize(n);
    true_parent_degree_.assign(n, 0);
    reg_.children.reserve(n);
    for (int64_t i = 0; i < n; ++i) {
      const int64_t nb = i / cfg_.households_per_neighborhood;
      HouseholdLatent& hh = latent_[i];
      hh.ses = s * nb_ses_[nb] + rest * rng_.Normal();
      const double p_mig = ShiftedRate(cfg_.migrant_rate, -0.6 * nb_ses_[nb] + nb_migrant_shift_[nb]);
      hh.migrant = rng_.Bernoulli(p_mig);
      hh.origin = hh.migrant ? DrawCategorical(rng_, kOriginWeights) : 0;

      ChildRecord c;
      c.child_id = i + 1;
      c.household_id = i + 1;
      c.neighborhood_id = nb;
      c.municipality_id = Municipality(nb);
      c.birth_year = cfg_.birth_year_min +
                     static_cast<int>(rng_.Below(cfg_.birth_year_max - cfg_.birth_year_min + 1));
      c.gender_male = DrawGender(rng_.Bernoulli(0.505) ? 1 : 0);
      c.migration_generation = hh.migrant ? (rng_.Bernoulli(0.8) ? 2 : 1) : 0;
      c.migration_origin = hh.origin;
      c.n_siblings = DrawCategorical(rng_, kSiblingWeights);

      const bool mother_present = !rng_.Bernoulli(cfg_.mother_absence_rate);
      const bool father_present = !rng_.Bernoulli(ShiftedRate(cfg_.father_absence_rate, -0.3 * hh.ses));
      bool any_degree = false;
      for (int parent = 0; parent < 2; ++parent) {
        const bool is_father = parent == 1;
        if (is_father ? !father_present : !mother_present) continue;
        PersonRecord p;
        p.person_id = NextPersonId();
        p.role = PersonRole::kParent;
        p.birth_year = c.birth_year - static_cast<int>(std::lround(rng_.Normal(is_father ? 33.0 : 31.0, 4.0)));
        p.gender_male = DrawGender(is_father ? 1 : 0);
        p.migration_generation = hh.migrant ? 1 : 0;
        p.migration_origin = hh.origin;
        const bool degree = rng_.Bernoulli(Sigmoid(-0.7 + 1.0 * hh.ses + 0.9 * rng_.Normal()));
        any_degree = any_degree || degree;
        p.has_university_degree = ObserveDegree(degree, cfg_.degree_missing_rate);
        const double log_mean = (is_father ? 10.5 : 9.9) + 0.45 * hh.ses + (degree ? 0.3 : 0.0) -
                                (hh.migrant ? 0.2 : 0.0);
        p.income = DrawIncome(log_mean, is_father ? 0.5 : 0.7, is_father ? 0.05 : 0.15);
        p.household_id = c.household_id;
        p.neighborhood_id = nb;
        p.municipality_id = c.municipality_id;
        (is_father ? c.father_id : c.mother_id) = p.person_id;
        reg_.persons.push_back(p);
      }
      true_parent_degree_[i] = any_degree ? 1 : 0;

      c.disability = rng_.Bernoulli(cfg_.disability_rate) ? 1 : 0;
      c.special_education_sbo =
          rng_.Bernoulli(Sigmoid(-3.4 - 0.5 * hh.ses + 2.0 * c.disability)) ? 1 : 0;
      const double p_wpo = Sigmoid(-2.2 - 1.2 * hh.ses - 1.5 * (any_degree ? 1.0 : 0.0) +
                                   (hh.migrant ? 0.8 : 0.0));
      const bool wpo = rng_.Bernoulli(p_wpo);
      const bool high = rng_.Bernoulli(0.35);
      if (c.special_education_sbo == 1) {
        c.wpo_weight = std::nullopt;
      } else {
        c.wpo_weight = wpo ? (high ? 1.2 : 0.3) : 0.0;
      }
      reg_.children.push_back(c);
    }
  }

  void MakeGrandparents() {
    const size_t n_parents = reg_.persons.size();
    int64_t household = cfg_.n_children + 1;
    for (size_t k = 0; k < n_parents; ++k) {
      const PersonRecord parent = reg_.persons[k];
      const int64_t child_index = parent.household_id - 1;
      const double ses = latent_[child_index].ses;
      const int64_t muni = parent.municipality_id;
      const bool local = rng_.Bernoulli(cfg_.grandparent_same_municipality_rate);
      int64_t nb;
      if (local) {
        const int64_t first = muni * cfg_.neighborhoods_per_municipality;
        const int64_t last = std::min<int64_t>(n_neighborhoods_, first + cfg_.neighborhoods_per_municipality);
        nb = first + static_cast<int64_t>(rng_.Below(last - first));
      } else {
        nb = static_cast<int64_t>(rng_.Below(n_neighborhoods_));
      }
      for (int g = 0; g < 2; ++g) {
        PersonRecord gp;
        gp.person_id = NextPersonId();
        gp.role = PersonRole::kGrandparent;
        gp.birth_year = parent.birth_year - static_cast<int>(std::lround(rng_.Normal(29.0, 4.0)));
        gp.gender_male = DrawGender(g == 0 ? 1 : 0);
        gp.migration_generation = parent.migration_generation;
        gp.migration_origin = parent.migration_origin;
        gp.alive = rng_.Bernoulli(cfg_.grandparent_survival_rate);
        const bool degree = rng_.Bernoulli(Sigmoid(-1.6 + 0.8 * ses + rng_.Normal()));
        const auto observed = ObserveDegree(degree, std::min(1.0, cfg_.degree_missing_rate + 0.2));
        auto income = DrawIncome(9.9 + 0.4 * ses, 0.6, 0.0);
        if (income) income = std::max(*income, cfg_.pension_floor);
        if (gp.alive) {
          gp.has_university_degree = observed;
          gp.income = income;
          gp.household_id = household;
          gp.neighborhood_id = nb;
          gp.municipality_id = Municipality(nb);
        }
        parent_of_grandparent_.push_back(parent.person_id);
        grandparent_ids_.push_back(gp.person_id);
        reg_.persons.push_back(gp);
      }
      ++household;
    }
    next_household_ = household;
  }

  void MakeResidents() {
    for (int64_t nb = 0; nb < n_neighborhoods_; ++nb) {
      for (int r = 0; r < cfg_.extra_residents_per_neighborhood; ++r) {
        PersonRecord p;
        p.person_id = NextPersonId();
        p.role = PersonRole::kResident;
        const double ses = cfg_.ses_sorting * nb_ses_[nb] +
                           std::sqrt(1.0 - cfg_.ses_sorting * cfg_.ses_sorting) * rng_.Normal();
        p.birth_year = cfg_.birth_year_min - 20 - static_cast<int>(rng_.Below(50));
        p.gender_male = DrawGender(rng_.Bernoulli(0.5) ? 1 : 0);
        const bool migrant =
            rng_.Bernoulli(ShiftedRate(cfg_.migrant_rate, -0.6 * nb_ses_[nb] + nb_migrant_shift_[nb]));
        p.migration_generation = migrant ? (rng_.Bernoulli(0.6) ? 1 : 2) : 0;
        static constexpr double kOriginWeights[] = {0.0, 0.22, 0.22, 0.18, 0.08, 0.15, 0.15};
        p.migration_origin = migrant ? DrawCategorical(rng_, kOriginWeights) : 0;
        const bool degree = rng_.Bernoulli(Sigmoid(-0.9 + 1.0 * ses + 0.9 * rng_.Normal()));
        p.has_university_degree = ObserveDegree(degree, cfg_.degree_missing_rate);
        p.income = DrawIncome(10.1 + 0.45 * ses + (degree ? 0.3 : 0.0), 0.7, 0.1);
        p.household_id = next_household_++;
        p.neighborhood_id = nb;
        p.municipality_id = Municipality(nb);
        reg_.persons.push_back(p);
      }
    }
  }

  void MakeClasses() {
    const int64_t n = cfg_.n_children;
    const double s = cfg_.ses_sorting;
    const double rest = std::sqrt(1.0 - s * s);
    std::vector<double> key(n);
    for (int64_t i = 0; i < n; ++i) key[i] = s * latent_[i].ses + rest * rng_.Normal();
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return key[a] < key[b]; });

    std::vector<int64_t> sizes;
    int64_t assigned = 0;
    while (assigned < n) {
      int64_t size = std::lround(rng_.Normal(cfg_.mean_class_size, cfg_.class_size_sd));
      size = std::max<int64_t>(size, 6);
      if (n - assigned - size < 6) size = n - assigned;
      sizes.push_back(size);
      assigned += size;
    }
    // Classes are grouped into schools of 1..max_classes_per_school.
    std::vector<int64_t> class_school(sizes.size());
    std::vector<double> school_urbanicity;
    for (size_t c = 0; c < sizes.size();) {
      const int64_t school = static_cast<int64_t>(school_urbanicity.size());
      school_urbanicity.push_back(std::round(std::exp(rng_.Normal(11.2, 1.1))));
      const size_t count = 1 + rng_.Below(cfg_.max_classes_per_school);
      for (size_t k = 0; k < count && c < sizes.size(); ++k, ++c) class_school[c] = school;
    }
    size_t pos = 0;
    for (size_t c = 0; c < sizes.size(); ++c) {
      std::vector<int64_t> members(order.begin() + pos, order.begin() + pos + sizes[c]);
      pos += sizes[c];
      std::sort(members.begin(), members.end());
      for (int64_t m : members) {
        ChildRecord& child = reg_.children[m];
        child.school_class_id = static_cast<int64_t>(c) + 1;
        child.school_id = class_school[c] + 1;
        child.school_urbanicity = school_urbanicity[class_school[c]];
      }
      classes_.push_back(std::move(members));
    }
  }

  void MakeEdges() {
    for (Relation r : kAllRelations) reg_.edges[static_cast<size_t>(r)].relation = r;
    auto& classmates = reg_.edges[static_cast<size_t>(Relation::kClassmates)].pairs;
    for (const auto& members : classes_) {
      for (int64_t a : members) {
        for (int64_t b : members) {
          if (a != b) classmates.emplace_back(a + 1, b + 1);
        }
      }
    }
    auto& parents = reg_.edges[static_cast<size_t>(Relation::kParents)].pairs;
    auto& children = reg_.edges[static_cast<size_t>(Relation::kChildren)].pairs;
    for (const auto& c : reg_.children) {
      for (const auto& pid : {c.father_id, c.mother_id}) {
        if (!pid) continue;
        parents.emplace_back(c.child_id, *pid);
        children.emplace_back(*pid, c.child_id);
      }
    }
    auto& family = reg_.edges[static_cast<size_t>(Relation::kParentOrChild)].pairs;
    for (size_t k = 0; k < grandparent_ids_.size(); ++k) {
      const PersonRecord& gp = reg_.persons[grandparent_ids_[k] - 1];
      if (!gp.alive) continue;
      family.emplace_back(parent_of_grandparent_[k], gp.person_id);
      family.emplace_back(gp.person_id, parent_of_grandparent_[k]);
    }
    std::sort(family.begin(), family.end());

    // Neighbors: persons sharing a neighborhood, ordered by id. Blocks larger
    // than cap + 1 connect each person to the cap/2 nearest ids on each side
    // of a ring, which keeps the relation symmetric.
    std::vector<std::vector<int64_t>> blocks(n_neighborhoods_);
    for (const auto& p : reg_.persons) {
      if (p.alive && p.neighborhood_id >= 0) blocks[p.neighborhood_id].push_back(p.person_id);
    }
    auto& neighbors = reg_.edges[static_cast<size_t>(Relation::kNeighbors)].pairs;
    const int64_t half = std::max(1, cfg_.neighbor_cap / 2);
    for (auto& block : blocks) {
      const int64_t m = static_cast<int64_t>(block.size());
      if (m <= cfg_.neighbor_cap + 1) {
        for (int64_t a = 0; a < m; ++a) {
          for (int64_t b = 0; b < m; ++b) {
            if (a != b) neighbors.emplace_back(block[a], block[b]);
          }
        }
        continue;
      }
      for (int64_t a = 0; a < m; ++a) {
        std::vector<int64_t> linked;
        for (int64_t d = 1; d <= half; ++d) {
          linked.push_back(block[(a + d) % m]);
          linked.push_back(block[(a - d + m) % m]);
        }
        std::sort(linked.begin(), linked.end());
        linked.erase(std::unique(linked.begin(), linked.end()), linked.end());
        for (int64_t b : linked) {
          if (b != block[a]) neighbors.emplace_back(block[a], b);
        }
      }
    }
    std::sort(neighbors.begin(), neighbors.end());
  }

  void DrawOutcomes() {
    const std::vector<double> logit = OutcomeLogit(reg_);
    for (size_t i = 0; i < reg_.children.size(); ++i) {
      reg_.children[i].outcome_university = rng_.Bernoulli(Sigmoid(logit[i])) ? 1 : 0;
    }
  }

  const ScenarioConfig& cfg_;
  Rng rng_;
  Registry reg_;
  int64_t n_neighborhoods_ = 0;
  int64_t next_household_ = 0;
  std::vector<double> nb_ses_;
  std::vector<double> nb_migrant_shift_;
  std::vector<HouseholdLatent> latent_;
  std::vector<int> true_parent_degree_;
  std::vector<int64_t> grandparent_ids_;
  std::vector<int64_t> parent_of_grandparent_;
  std::vector<std::vector<int64_t>> classes_;
};

// z-score over the cohort; constant columns become all-zero.
std::vector<double> Standardize(std::vector<double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
  return v;
}

}  // namespace

Registry GenerateRegistry(const ScenarioConfig& config) {
  config.Validate();
  Generator gen(config);
  return gen.Run();
}

std::map<std::string, std::vector<double>> ComputeOutcomeTerms(const Registry& reg) {
  const size_t n = reg.children.size();
  const auto person_index = reg.PersonIndex();
  const auto child_index = reg.ChildIndex();

  // Population income ranks over every person reporting income.
  features::OptionalColumn incomes(reg.persons.size());
  for (size_t k = 0; k < reg.persons.size(); ++k) incomes[k] = reg.persons[k].income;
  bool any_income = std::any_of(incomes.begin(), incomes.end(), [](const auto& v) { return v.has_value(); });
  const features::OptionalColumn ranks =
      any_income ? features::RankTransform(incomes) : features::OptionalColumn(reg.persons.size());

  auto person = [&](const std::optional<int64_t>& id) -> const PersonRecord* {
    if (!id) return nullptr;
    auto it = person_index.find(*id);
    return it == person_index.end() ? nullptr : &reg.persons[it->second];
  };
  auto rank_of = [&](const PersonRecord* p) -> std::optional<double> {
    if (!p) return std::nullopt;
    return ranks[static_cast<size_t>(p - reg.persons.data())];
  };
  auto degree_of = [](const PersonRecord* p) { return p && p->has_university_degree.value_or(0) == 1; };

  // Adjacency used by the context terms.
  std::unordered_map<int64_t, std::vector<int64_t>> person_neighbors;
  for (const auto& [a, b] : reg.Edges(Relation::kNeighbors).pairs) person_neighbors[a].push_back(b);
  std::unordered_map<int64_t, std::vector<int64_t>> grandparents;
  for (const auto& [a, b] : reg.Edges(Relation::kParentOrChild).pairs) {
    const PersonRecord* pb = person(b);
    if (pb && pb->role == PersonRole::kGrandparent) grandparents[a].push_back(b);
  }
  std::vector<std::vector<size_t>> classmates(n);
  for (const auto& [a, b] : reg.Edges(Relation::kClassmates).pairs) {
    classmates[child_index.at(b)].push_back(child_index.at(a));
  }

  std::map<std::string, std::vector<double>> t;
  for (const auto& name : OutcomeTermNames()) t[name].assign(n, 0.0);

  std::vector<int> parent_degree(n, 0);
  std::vector<double> household_income(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const ChildRecord& c = reg.children[i];
    const PersonRecord* father = person(c.father_id);
    const PersonRecord* mother = person(c.mother_id);
    parent_degree[i] = (degree_of(father) || degree_of(mother)) ? 1 : 0;
    double total = 0.0;
    for (const PersonRecord* p : {father, mother}) {
      if (p && p->income) total += *p->income;
    }
    household_income[i] = total;
  }
  const std::vector<double> household_rank = features::RankTransform(household_income);

  for (size_t i = 0; i < n; ++i) {
    const ChildRecord& c = reg.children[i];
    const PersonRecord* father = person(c.father_id);
    const PersonRecord* mother = person(c.mother_id);
    t["female"][i] = c.gender_male ? (*c.gender_male == 0 ? 1.0 : 0.0) : 0.5;
    t["male"][i] = 1.0 - t["female"][i];
    t["father_absent"][i] = father ? 0.0 : 1.0;
    t["mother_absent"][i] = mother ? 0.0 : 1.0;
    t["migrant"][i] = c.migration_generation > 0 ? 1.0 : 0.0;
    t["migration_generation"][i] = c.migration_generation;
    t["disability"][i] = c.disability;
    t["sbo"][i] = c.special_education_sbo;
    t["wpo"][i] = c.wpo_weight.value_or(0.0);
    t["parent_degree"][i] = parent_degree[i];
    t["father_degree"][i] = degree_of(father) ? 1.0 : 0.0;
    t["mother_degree"][i] = degree_of(mother) ? 1.0 : 0.0;
    const auto fr = rank_of(father);
    const auto mr = rank_of(mother);
    t["father_income_rank"][i] = fr.value_or(0.5);
    t["mother_income_rank"][i] = mr.value_or(0.5);
    double sum = 0.0;
    int cnt = 0;
    for (const auto& r : {fr, mr}) {
      if (r) {
        sum += *r;
        ++cnt;
      }
    }
    t["parent_income_rank"][i] = cnt ? sum / cnt : 0.5;
    t["household_income_rank"][i] = household_rank[i];

    double gmax = 0.0;
    for (const PersonRecord* p : {father, mother}) {
      if (!p) continue;
      auto it = grandparents.find(p->person_id);
      if (it == grandparents.end()) continue;
      for (int64_t g : it->second) gmax = std::max(gmax, rank_of(person(g)).value_or(0.0));
    }
    t["grandparent_income_rank_max"][i] = gmax;

    // Classmates' parents' income ranks and classmates' parental degrees.
    double class_sum = 0.0;
    int class_cnt = 0;
    double deg_sum = 0.0;
    for (size_t j : classmates[i]) {
      const ChildRecord& m = reg.children[j];
      for (const auto& pid : {m.father_id, m.mother_id}) {
        if (const auto r = rank_of(person(pid))) {
          class_sum += *r;
          ++class_cnt;
        }
      }
      deg_sum += parent_degree[j];
    }
    t["class_mean_income_rank"][i] = class_cnt ? class_sum / class_cnt : 0.5;
    t["classmates_parent_degree_share"][i] =
        classmates[i].empty() ? 0.0 : deg_sum / static_cast<double>(classmates[i].size());

    // Neighbors of the household's parents, excluding the parents.
    std::vector<int64_t> peers;
    for (const PersonRecord* p : {father, mother}) {
      if (!p) continue;
      auto it = person_neighbors.find(p->person_id);
      if (it != person_neighbors.end()) peers.insert(peers.end(), it->second.begin(), it->second.end());
    }
    std::sort(peers.begin(), peers.end());
    peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
    std::erase_if(peers, [&](int64_t id) {
      return (c.father_id && id == *c.father_id) || (c.mother_id && id == *c.mother_id);
    });
    double edu_sum = 0.0;
    int edu_cnt = 0;
    double migrant_cnt = 0.0;
    double edu_migrant_cnt = 0.0;
    for (int64_t id : peers) {
      const PersonRecord* p = person(id);
      if (p->has_university_degree) {
        edu_sum += *p->has_university_degree;
        ++edu_cnt;
      }
      const bool mig = p->migration_generation > 0;
      migrant_cnt += mig ? 1.0 : 0.0;
      edu_migrant_cnt += (mig && degree_of(p)) ? 1.0 : 0.0;
    }
    const double np = static_cast<double>(peers.size());
    t["neighborhood_mean_education"][i] = edu_cnt ? edu_sum / edu_cnt : 0.0;
    t["migrant_neighbor_share_x_migrant"][i] = np > 0 ? migrant_cnt / np : 0.0;
    t["educated_migrant_neighbor_share"][i] = np > 0 ? edu_migrant_cnt / np : 0.0;
  }

  static const std::unordered_set<std::string> kBinary = {
      "female", "male", "father_absent", "mother_absent", "migrant", "disability", "sbo",
      "parent_degree", "father_degree", "mother_degree"};
  for (auto& [name, values] : t) {
    if (!kBinary.count(name)) values = Standardize(std::move(values));
  }
  // Share of migrant neighbors only matters for migrant children.
  auto& mig_share = t["migrant_neighbor_share_x_migrant"];
  for (size_t i = 0; i < n; ++i) mig_share[i] *= t["migrant"][i];
  return t;
}

std::vector<double> OutcomeLogit(const Registry& reg) {
  const auto& cfg = reg.config;
  const auto terms = ComputeOutcomeTerms(reg);
  std::vector<double> logit(reg.children.size(), cfg.intercept);
  for (const auto& [name, w] : cfg.linear_weights) {
    const auto& v = terms.at(name);
    for (size_t i = 0; i < logit.size(); ++i) logit[i] += w * v[i];
  }
  if (cfg.outcome_mode == OutcomeMode::kInteraction) {
    for (const auto& term : cfg.interaction_terms) {
      for (size_t i = 0; i < logit.size(); ++i) {
        double prod = term.weight;
        for (const auto& f : term.factors) prod *= terms.at(f)[i];
        logit[i] += prod;
      }
    }
  }
  if (cfg.outcome_mode == OutcomeMode::kNetworkMediated) {
    for (const auto& [name, w] : cfg.network_weights) {
      const auto& v = terms.at(name);
      for (size_t i = 0; i < logit.size(); ++i) logit[i] += w * v[i];
    }
  }
  return logit;
}

}  // namespace predgap::synthpop
