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

#ifndef PREDGAP_EVALGAP_METRICS_HPP_
#define PREDGAP_EVALGAP_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace predgap::evalgap {

struct Confusion {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t n() const { return tp + fp + tn + fn; }
};

Confusion Count(std::span<const int> y_true, std::span<const int> y_pred);

// Matthews correlation from confusion counts; 0 when any marginal is empty.
double Mcc(const Confusion& c);
double Mcc(std::span<const int> y_true, std::span<const int> y_pred);
// True when the MCC denominator vanishes and the 0 convention applies.
bool MccDegenerate(const Confusion& c);

// 1 where p >= threshold.
std::vector<int> Classify(std::span<const double> probabilities, double threshold = 0.5);

// Area under the ROC curve via the midrank Mann-Whitney statistic. Throws
// InvalidArgument when y_true holds a single class.
double Auc(std::span<const int> y_true, std::span<const double> probabilities);

// Mean log-loss; probabilities are clipped to [1e-15, 1 - 1e-15].
double LogLoss(std::span<const int> y_true, std::span<const double> probabilities);

struct F1Point {
  double threshold = 0.5;
  double f1_positive = 0.0;
  double f1_negative = 0.0;
};
// F1 is 0 for a class that is neither predicted nor present.
double F1(const Confusion& c, bool positive_class);
std::vector<F1Point> F1Sweep(std::span<const int> y_true, std::span<const double> probabilities,
                             std::span<const double> thresholds);

struct Agreement {
  int64_t n = 0;
  int64_t both_agreeing = 0;
  int64_t both_correct = 0;
  int64_t both_wrong = 0;
  int64_t only_a_correct = 0;
  int64_t only_b_correct = 0;
  // both_agreeing == both_correct + both_wrong and all cells sum to n.
  bool Consistent() const;
};
Agreement AgreementTable(std::span<const int> y_true, std::span<const int> pred_a, std::span<const int> pred_b);

enum class Metric : uint8_t { kMcc, kAuc, kLogLoss, kF1 };
std::string_view MetricName(Metric m);
Metric ParseMetric(std::string_view name);

}  // namespace predgap::evalgap

#endif  // PREDGAP_EVALGAP_METRICS_HPP_
