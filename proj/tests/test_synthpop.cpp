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
#include <map>
#include <set>

#include "common/error.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "pipeline/run_config.hpp"
#include "synthpop/registry.hpp"
#include "synthpop/summary.hpp"

using namespace predgap;
using namespace predgap::synthpop;

namespace {

ScenarioConfig Small(uint64_t seed) {
  ScenarioConfig c = pipeline::ScenarioPreset("linear");
  c.n_children = 600;
  c.rng_seed = seed;
  return c;
}

std::map<std::string, std::string> DirHashes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    out[e.path().filename().string()] = Sha256File(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("same seed, same registry bytes") {
  testing::TempDir a("reg_a"), b("reg_b"), c("reg_c");
  SaveRegistry(GenerateRegistry(Small(5)), a.path());
  SaveRegistry(GenerateRegistry(Small(5)), b.path());
  SaveRegistry(GenerateRegistry(Small(6)), c.path());
  const auto ha = DirHashes(a.path());
  CHECK(ha.size() >= 3);
  CHECK(ha == DirHashes(b.path()));
  CHECK(ha != DirHashes(c.path()));
}

TEST_CASE("generated registries satisfy the referential invariants") {
  const Registry reg = GenerateRegistry(Small(11));
  CHECK(reg.children.size() == 600);
  CHECK_NOTHROW(ValidateRegistry(reg));
  for (Relation r : kAllRelations) CHECK_FALSE(reg.Edges(r).pairs.empty());

  const auto persons = reg.PersonIndex();
  for (const auto& child : reg.children) {
    if (child.father_id) CHECK(persons.count(*child.father_id) == 1);
    if (child.mother_id) CHECK(persons.count(*child.mother_id) == 1);
  }
  // Classmates are symmetric and never self-loops.
  std::set<std::pair<int64_t, int64_t>> cls(reg.Edges(Relation::kClassmates).pairs.begin(),
                                            reg.Edges(Relation::kClassmates).pairs.end());
  for (const auto& [s, t] : cls) {
    CHECK(s != t);
    CHECK(cls.count({t, s}) == 1);
  }

  Registry broken = reg;
  broken.edges[static_cast<size_t>(Relation::kParents)].pairs.push_back({reg.children[0].child_id, -12345});
  CHECK_THROWS_AS(ValidateRegistry(broken), InvariantError);
}

TEST_CASE("save then load reproduces the files") {
  testing::TempDir a("rt_a"), b("rt_b");
  const Registry reg = GenerateRegistry(Small(3));
  SaveRegistry(reg, a.path());
  const Registry back = LoadRegistry(a.path());
  CHECK(back.children.size() == reg.children.size());
  CHECK(back.persons.size() == reg.persons.size());
  SaveRegistry(back, b.path());
  CHECK(DirHashes(a.path()) == DirHashes(b.path()));
  CHECK(OutcomeLogit(back) == OutcomeLogit(reg));
}

TEST_CASE("scenario validation names the bad field") {
  ScenarioConfig c;
  c.n_children = 10;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = ScenarioConfig{};
  c.father_absence_rate = 1.5;
  CHECK_THROWS_WITH_AS(c.Validate(), doctest::Contains("father_absence_rate"), ConfigError);
  c = ScenarioConfig{};
  c.linear_weights["no_such_term"] = 1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  Json j = ScenarioConfig{}.ToJson();
  j["bogus"] = 1;
  CHECK_THROWS_AS(ScenarioConfig::FromJson(j), ConfigError);
  CHECK(ScenarioConfig::FromJson(Small(1).ToJson()).ToJson() == Small(1).ToJson());
}

TEST_CASE("generator honours the configured rates") {
  ScenarioConfig c = Small(21);
  c.n_children = 4000;
  c.father_absence_rate = 0.2;
  const Registry reg = GenerateRegistry(c);
  double absent = 0;
  double positive = 0;
  for (const auto& child : reg.children) {
    absent += child.father_id ? 0 : 1;
    positive += child.outcome_university;
  }
  CHECK(absent / 4000 == doctest::Approx(0.2).epsilon(0.2));
  // Linear preset: prevalence well away from 0 and 1.
  CHECK(positive / 4000 > 0.15);
  CHECK(positive / 4000 < 0.7);
}

TEST_CASE("outcome logit follows the configured terms") {
  ScenarioConfig c = pipeline::ScenarioPreset("none");
  c.n_children = 500;
  c.intercept = -0.25;
  const Registry flat = GenerateRegistry(c);
  for (double z : OutcomeLogit(flat)) CHECK(z == doctest::Approx(-0.25));

  c.linear_weights["female"] = 2.0;
  const Registry weighted = GenerateRegistry(c);
  const auto terms = ComputeOutcomeTerms(weighted);
  const auto logit = OutcomeLogit(weighted);
  const auto& female = terms.at("female");
  for (size_t i = 0; i < logit.size(); ++i) CHECK(logit[i] == doctest::Approx(-0.25 + 2.0 * female[i]));
}

TEST_CASE("summary statistics use population std and linear percentiles") {
  std::vector<std::optional<double>> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  v.push_back(std::nullopt);
  const SummaryRow row = SummarizeColumn("x", v);
  CHECK(row.n == 100);
  CHECK(row.mean == doctest::Approx(50.5));
  CHECK(row.std == doctest::Approx(28.86607004772212));
  CHECK(row.p1 == doctest::Approx(1.99));
  CHECK(row.p10 == doctest::Approx(10.9));
  CHECK(row.p50 == doctest::Approx(50.5));
  CHECK(row.p90 == doctest::Approx(90.1));
  CHECK(row.p99 == doctest::Approx(99.01));
}
