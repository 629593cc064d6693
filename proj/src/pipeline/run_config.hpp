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

#ifndef PREDGAP_PIPELINE_RUN_CONFIG_HPP_
#define PREDGAP_PIPELINE_RUN_CONFIG_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common/io.hpp"
#include "evalgap/analysis.hpp"
#include "features/feature_table.hpp"
#include "model_gbt/boost_model.hpp"
#include "model_gnn/gnn_model.hpp"
#include "synthpop/registry.hpp"

namespace predgap::pipeline {

// Scenario presets: "none" (bare defaults), "linear", "interaction",
// "network", "nested".
synthpop::ScenarioConfig ScenarioPreset(std::string_view name);

// Every key with its default. Unknown keys in a config file are rejected.
Json DefaultRunConfig();

struct SubgroupRequest {
  evalgap::SubgroupSpec spec;
  std::optional<std::string> by;  // categorical variable crossed with spec.variable
  std::string FileKey() const;    // e.g. "gender_by_father_known"
};

class RunConfig {
 public:
  RunConfig();
  // Defaults, then the file (if any), then each "key.path=value" override.
  // A file without run keys is read as a bare scenario config.
  static RunConfig Load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);
  static RunConfig FromJson(const Json& doc);

  // Sets a dotted key; the value is parsed as JSON when possible, else
  // taken as a string. Throws ConfigError on unknown keys.
  void Set(std::string_view dotted_key, std::string_view value);
  void Validate() const;

  const Json& doc() const { return doc_; }
  std::filesystem::path registry_dir() const;
  std::filesystem::path out_dir() const;
  std::string run_name() const;
  synthpop::ScenarioConfig scenario() const;
  features::ContextSetSpec context() const;
  std::vector<std::string> models() const;
  uint64_t split_seed() const;
  double train_fraction() const;
  uint64_t tuning_seed() const;
  uint64_t inner_split_seed() const;
  int budget(const std::string& family) const;
  int folds() const;
  bool record_time() const;
  bool tune_baseline() const;
  model_gbt::GbtParams gbt_defaults() const;
  model_gnn::GnnConfig gnn_defaults() const;
  double threshold() const;
  evalgap::BootstrapOptions bootstrap() const;
  std::vector<SubgroupRequest> subgroups() const;
  std::vector<std::string> nested_models() const;
  std::vector<double> sweep_thresholds() const;
  int embed_components() const;
  std::vector<std::string> embed_restricted() const;
  // Seeds recorded in manifests.
  Json Seeds() const;

 private:
  Json doc_;
};

// "demographics", "nuclear", "household", "extended", "school", "full".
std::string ContextKey(const features::ContextSetSpec& context);

}  // namespace predgap::pipeline

#endif  // PREDGAP_PIPELINE_RUN_CONFIG_HPP_
