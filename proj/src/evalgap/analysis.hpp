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

#ifndef PREDGAP_EVALGAP_ANALYSIS_HPP_
#define PREDGAP_EVALGAP_ANALYSIS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/io.hpp"
#include "evalgap/bootstrap.hpp"

namespace predgap::evalgap {

// Row partition of the child cohort. Both lists are ascending.
struct SplitSpec {
  uint64_t seed = 0;
  double train_fraction = 0.8;
  std::vector<size_t> train;
  std::vector<size_t> test;

  Json ToJson() const;
  static SplitSpec FromJson(const Json& j);
};

// Shuffles 0..n-1 with the seed and takes the first round(n * fraction)
// rows for training.
SplitSpec MakeSplit(size_t n, uint64_t seed, double train_fraction = 0.8);

// Partition of `rows` into (fit, holdout) with the same rule; used for
// inner validation so the test rows are never touched.
std::pair<std::vector<size_t>, std::vector<size_t>> InnerSplit(std::span<const size_t> rows, uint64_t seed,
                                                               double fit_fraction = 0.8);

// k folds over `rows`, assigned after a seeded shuffle; fold sizes differ
// by at most one.
std::vector<std::vector<size_t>> KFolds(std::span<const size_t> rows, int k, uint64_t seed);

enum class Binning : uint8_t { kCategorical, kQuantile };

struct SubgroupSpec {
  std::string variable;
  Binning binning = Binning::kCategorical;
  int n_bins = 10;
  int min_size = 50;
  // Optional display labels for categorical codes.
  std::map<double, std::string> labels;
};

struct GroupAssignment {
  std::vector<std::string> labels;
  std::vector<int> group;  // per row, index into labels
};

// Categorical groups are ordered by value; quantile bins are equal-count
// over the non-missing rows (ties broken by row order). Missing values form
// a trailing "missing" group.
GroupAssignment AssignGroups(std::span<const std::optional<double>> values, const SubgroupSpec& spec);

struct GroupReport {
  std::string label;
  size_t n = 0;
  bool suppressed = false;
  BootstrapResult result;  // empty when suppressed
};

struct Disaggregation {
  SubgroupSpec spec;
  std::vector<std::string> models;
  std::vector<GroupReport> groups;
};

// Per-group bootstrap of every model and gap pair; group g resamples with
// DeriveSeed(options.seed, g). The classification threshold is the pooled
// one. Throws InvalidArgument when every group is below min_size.
Disaggregation Disaggregate(const SubgroupSpec& spec, std::span<const std::optional<double>> values,
                            std::span<const int> y_true, const std::vector<std::string>& names,
                            const std::vector<std::vector<double>>& probabilities,
                            const std::vector<std::pair<size_t, size_t>>& gap_pairs, const MetricSpec& metric,
                            const BootstrapOptions& options);

// Columns: group,n,model,mcc,ci_lo,ci_hi, then gap_<b>_<a>, _lo, _hi per
// gap pair (repeated on each model row of the group). Suppressed groups
// keep their row with empty metric fields.
void WriteDisaggregationCsv(const Disaggregation& d, const std::filesystem::path& path);

struct EvalReport {
  std::string run;
  size_t n_test = 0;
  double threshold = 0.5;
  BootstrapOptions options;
  std::vector<ModelEstimate> estimates;
  std::vector<GapEstimate> gaps;

  Json ToJson() const;
};

// model,metric,point,ci_lo,ci_hi,n_resamples,degenerate
void WriteEvalCsv(const EvalReport& report, const std::filesystem::path& path);
// model_a,model_b,metric,gap,ci_lo,ci_hi
void WriteGapCsv(const std::vector<GapEstimate>& gaps, const std::filesystem::path& path);

struct NamedAgreement {
  std::string model_a;
  std::string model_b;
  Agreement table;
};
void WriteAgreementCsv(const std::vector<NamedAgreement>& rows, const std::filesystem::path& path);

struct NamedSweep {
  std::string model;
  std::vector<F1Point> points;
};
void WriteSweepCsv(const std::vector<NamedSweep>& sweeps, const std::filesystem::path& path);

struct NestedRow {
  std::string context;  // "I,F"
  std::string label;    // "+Nuclear family"
  std::string model;
  size_t n_features = 0;
  Interval mcc;
  bool default_config = false;  // no tuned configuration was available
};
void WriteNestedCsv(const std::vector<NestedRow>& rows, const std::filesystem::path& path);

}  // namespace predgap::evalgap

#endif  // PREDGAP_EVALGAP_ANALYSIS_HPP_
