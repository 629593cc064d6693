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

#ifndef PREDGAP_PIPELINE_SUBGROUPS_HPP_
#define PREDGAP_PIPELINE_SUBGROUPS_HPP_

#include <map>
#include <string>
#include <vector>

#include "features/feature_table.hpp"

namespace predgap::pipeline {

struct SubgroupVariable {
  features::OptionalColumn values;  // per child, registry order
  std::map<double, std::string> labels;  // for categorical codes
};

// Short names (father_known, mother_known, gender, mother_degree,
// father_income_rank, mother_income_rank, household_income_rank,
// school_income_rank, school_wpo_weight, neighbor_income_rank,
// neighbor_education, wpo_weight, migration_generation) or any raw input
// variable name such as "F: Mother's income rank". Throws ConfigError on
// an unknown name. `raw` is RawInputColumns() of the registry.
SubgroupVariable LoadSubgroupVariable(const std::vector<features::OptionalColumn>& raw, const std::string& name);

std::vector<std::string> SubgroupVariableNames();

}  // namespace predgap::pipeline

#endif  // PREDGAP_PIPELINE_SUBGROUPS_HPP_
