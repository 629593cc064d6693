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

#ifndef PREDGAP_EVALGAP_BOOTSTRAP_HPP_
#define PREDGAP_EVALGAP_BOOTSTRAP_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evalgap/metrics.hpp"

namespace predgap::evalgap {

struct MetricSpec {
  Metric metric = Metric::kMcc;
  double threshold = 0.5;  // MCC and F1
};

struct MetricValue {
  double value = 0.0;
  // MCC with a vanished denominator, or AUC on a single-class sample
  // (recorded as 0.5).
  bool degenerate = false;
};

MetricValue Evaluate(const MetricSpec& spec, std::span<const int> y_true, std::span<const double> probabilities);

struct Interval {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double HalfWidth() const { return (hi - lo) / 2.0; }
  bool Contains(double v) const { return lo <= v && v <= hi; }
};

struct ModelEstimate {
  std::string model;
  Metric metric = Metric::kMcc;
  Interval ci;
  int n_resamples = 0;
  int degenerate = 0;  // resamples that hit the convention value
};

// Gap = metric(model_b) - metric(model_a) on shared resamples.
struct GapEstimate {
  std::string model_a;
  std::string model_b;
  Metric metric = Metric::kMcc;
  Interval ci;
};

struct BootstrapOptions {
  int n_resamples = 1000;
  uint64_t seed = 2024;
  double confidence = 0.95;
};

struct BootstrapResult {
  std::vector<ModelEstimate> models;
  std::vector<GapEstimate> gaps;
};

// Pairs (a, b) for models listed from simplest to most flexible: each model
// against its predecessor, then wider steps, e.g. for three models
// (0,1), (1,2), (0,2).
std::vector<std::pair<size_t, size_t>> DefaultGapPairs(size_t n_models);

// Percentile bootstrap over rows. Resample b draws its indices from
// DeriveSeed(seed, b) and every model is scored on the same indices, so the
// result does not depend on the thread count. Intervals are widened to
// contain the point estimate when the percentile interval misses it.
// Throws InvalidArgument if n_resamples < 100 or shapes disagree.
BootstrapResult BootstrapCompare(const MetricSpec& spec, std::span<const int> y_true,
                                 const std::vector<std::string>& names,
                                 const std::vector<std::vector<double>>& probabilities,
                                 const std::vector<std::pair<size_t, size_t>>& gap_pairs,
                                 const BootstrapOptions& options = {});

}  // namespace predgap::evalgap

#endif  // PREDGAP_EVALGAP_BOOTSTRAP_HPP_
