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

#include "evalgap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "common/error.hpp"

namespace predgap::evalgap {

namespace {

void CheckLengths(size_t a, size_t b) {
  if (a != b) throw InvalidArgument("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw InvalidArgument("empty input");
}

}  // namespace

Confusion Count(std::span<const int> y_true, std::span<const int> y_pred) {
  CheckLengths(y_true.size(), y_pred.size());
  Confusion c;
  for (size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] != 0;
    const bool p = y_pred[i] != 0;
    if (t && p) ++c.tp;
    else if (!t && p) ++c.fp;
    else if (!t && !p) ++c.tn;
    else ++c.fn;
  }
  return c;
}

bool MccDegenerate(const Confusion& c) {
  return c.tp + c.fp == 0 || c.tp + c.fn == 0 || c.tn + c.fp == 0 || c.tn + c.fn == 0;
}

double Mcc(const Confusion& c) {
  if (MccDegenerate(c)) return 0.0;
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  const double denom = std::sqrt((tp + fp) * (tp + fn)) * std::sqrt((tn + fp) * (tn + fn));
  return (tp * tn - fp * fn) / denom;
}

double Mcc(std::span<const int> y_true, std::span<const int> y_pred) { return Mcc(Count(y_true, y_pred)); }

std::vector<int> Classify(std::span<const double> probabilities, double threshold) {
  std::vector<int> out(probabilities.size());
  for (size_t i = 0; i < probabilities.size(); ++i) out[i] = probabilities[i] >= threshold ? 1 : 0;
  return out;
}

double Auc(std::span<const int> y_true, std::span<const double> probabilities) {
  CheckLengths(y_true.size(), probabilities.size());
  const size_t n = y_true.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return probabilities[a] < probabilities[b]; });
  double rank_sum = 0.0;
  int64_t pos = 0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && probabilities[order[j]] == probabilities[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) {
      if (y_true[order[k]]) {
        rank_sum += midrank;
        ++pos;
      }
    }
    i = j;
  }
  const int64_t neg = static_cast<int64_t>(n) - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("AUC is undefined for a single-class outcome");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double LogLoss(std::span<const int> y_true, std::span<const double> probabilities) {
  CheckLengths(y_true.size(), probabilities.size());
  double s = 0.0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    const double p = std::clamp(probabilities[i], 1e-15, 1.0 - 1e-15);
    s -= y_true[i] ? std::log(p) : std::log1p(-p);
  }
  return s / static_cast<double>(y_true.size());
}

double F1(const Confusion& c, bool positive_class) {
  const double hit = static_cast<double>(positive_class ? c.tp : c.tn);
  const double miss = static_cast<double>(c.fp + c.fn);
  const double denom = 2.0 * hit + miss;
  return denom == 0.0 ? 0.0 : 2.0 * hit / denom;
}

std::vector<F1Point> F1Sweep(std::span<const int> y_true, std::span<const double> probabilities,
                             std::span<const double> thresholds) {
  CheckLengths(y_true.size(), probabilities.size());
  std::vector<F1Point> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const Confusion c = Count(y_true, Classify(probabilities, t));
    out.push_back({t, F1(c, true), F1(c, false)});
  }
  return out;
}

bool Agreement::Consistent() const {
  return both_agreeing == both_correct + both_wrong &&
         both_correct + both_wrong + only_a_correct + only_b_correct == n;
}

Agreement AgreementTable(std::span<const int> y_true, std::span<const int> pred_a, std::span<const int> pred_b) {
  CheckLengths(y_true.size(), pred_a.size());
  CheckLengths(y_true.size(), pred_b.size());
  Agreement a;
  a.n = static_cast<int64_t>(y_true.size());
  for (size_t i = 0; i < y_true.size(); ++i) {
    const bool ca = (pred_a[i] != 0) == (y_true[i] != 0);
    const bool cb = (pred_b[i] != 0) == (y_true[i] != 0);
    if ((pred_a[i] != 0) == (pred_b[i] != 0)) ++a.both_agreeing;
    if (ca && cb) ++a.both_correct;
    else if (!ca && !cb) ++a.both_wrong;
    else if (ca) ++a.only_a_correct;
    else ++a.only_b_correct;
  }
  return a;
}

std::string_view MetricName(Metric m) {
  switch (m) {
    case Metric::kMcc: return "mcc";
    case Metric::kAuc: return "auc";
    case Metric::kLogLoss: return "log_loss";
    case Metric::kF1: return "f1";
  }
  return "mcc";
}

Metric ParseMetric(std::string_view name) {
  if (name == "mcc") return Metric::kMcc;
  if (name == "auc") return Metric::kAuc;
  if (name == "log_loss" || name == "logloss") return Metric::kLogLoss;
  if (name == "f1") return Metric::kF1;
  throw ConfigError("unknown metric '" + std::string(name) + "' (mcc, auc, log_loss, f1)");
}

}  // namespace predgap::evalgap
