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

#include "pipeline/subgroups.hpp"

#include <utility>

#include "common/error.hpp"

namespace predgap::pipeline {

namespace {

struct Alias {
  const char* name;
  const char* column;
  std::map<double, std::string> labels;
};

const std::vector<Alias>& Aliases() {
  static const std::vector<Alias> kAliases = {
      {"father_known", "F: Father known", {{0.0, "father absent"}, {1.0, "father known"}}},
      {"mother_known", "F: Mother known", {{0.0, "mother absent"}, {1.0, "mother known"}}},
      {"gender", "I: Gender (male)", {{0.0, "girl"}, {1.0, "boy"}}},
      {"mother_degree", "F: Mother univ. degree", {{0.0, "mother no degree"}, {1.0, "mother degree"}}},
      {"father_income_rank", "F: Father's income rank", {}},
      {"mother_income_rank", "F: Mother's income rank", {}},
      {"household_income_rank", "H: Total household income rank", {}},
      {"school_income_rank", "S: Mean income rank (s)", {}},
      {"school_wpo_weight", "S: Mean WPO weight (s)", {}},
      {"neighbor_income_rank", "N: Mean income rank (n)", {}},
      {"neighbor_education", "N: Mean education (n)", {}},
      {"wpo_weight", "F: WPO weight", {{0.0, "0"}, {0.3, "0.3"}, {1.2, "1.2"}}},
      {"migration_generation", "I: Migration generation", {{0.0, "native"}, {1.0, "1st"}, {2.0, "2nd"}, {3.0, "3rd+"}}},
  };
  return kAliases;
}

}  // namespace

std::vector<std::string> SubgroupVariableNames() {
  std::vector<std::string> out;
  for (const auto& a : Aliases()) out.emplace_back(a.name);
  return out;
}

SubgroupVariable LoadSubgroupVariable(const std::vector<features::OptionalColumn>& raw, const std::string& name) {
  std::string column = name;
  SubgroupVariable out;
  for (const auto& a : Aliases()) {
    if (name == a.name) {
      column = a.column;
      out.labels = a.labels;
    }
  }
  const auto& vars = features::InputVariables();
  for (size_t k = 0; k < vars.size(); ++k) {
    if (vars[k].name == column) {
      out.values = raw.at(k);
      return out;
    }
  }
  throw ConfigError("unknown subgroup variable '" + name + "'");
}

}  // namespace predgap::pipeline
