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

#ifndef PREDGAP_PIPELINE_STAGES_HPP_
#define PREDGAP_PIPELINE_STAGES_HPP_

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "common/io.hpp"
#include "evalgap/analysis.hpp"
#include "pipeline/run_config.hpp"

namespace predgap::pipeline {

// synth, prep, split, tune, train, eval, gap, nested, disagg, agree, sweep,
// embed, report, in pipeline order.
const std::vector<std::string>& StageNames();

// Runs one stage. Every stage checks the manifests of the stages it reads
// from and throws DependencyError naming the missing or stale artifact,
// then writes manifests/<stage>.json (files and their SHA-256) and
// audit/<stage>.json (which split partitions it touched).
void RunStage(const RunConfig& config, std::string_view stage);
// Every stage in order.
void RunAll(const RunConfig& config);

// Progress messages; stderr by default, silenced by an empty function.
void SetLogSink(std::function<void(std::string_view)> sink);

// Records which parts of the train/test split a stage touched.
class SplitAccess {
 public:
  explicit SplitAccess(evalgap::SplitSpec spec) : spec_(std::move(spec)) {}

  const std::vector<size_t>& TrainRows();
  // Row indices only, e.g. for disjointness assertions.
  const std::vector<size_t>& TestIndices();
  // Labels with every non-training row set to 0.
  std::vector<int> MaskedLabels(const std::vector<int>& labels);
  const std::vector<size_t>& TestRowsForEvaluation();
  Json AuditJson(const std::string& stage) const;

 private:
  evalgap::SplitSpec spec_;
  bool train_read_ = false;
  bool test_indices_read_ = false;
  bool test_read_ = false;
};

}  // namespace predgap::pipeline

#endif  // PREDGAP_PIPELINE_STAGES_HPP_
