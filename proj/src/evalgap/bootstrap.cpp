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

#include "evalgap/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"
#include "features/transforms.hpp"

namespace predgap::evalgap {

MetricValue Evaluate(const MetricSpec& spec, std::span<const int> y_true, std::span<const double> probabilities) {
  switch (spec.metric) {
    case Metric::kMcc: {
      const Confusion c = Count(y_true, Classify(probabilities, spec.threshold));
      return {Mcc(c), MccDegenerate(c)};
    }
    case Metric::kF1: {
      const Confusion c = Count(y_true, Classify(probabilities, spec.threshold));
      return {F1(c, true), false};
    }
    case Metric::kLogLoss:
      return {LogLoss(y_true, probabilities), false};
    case Metric::kAuc: {
      const bool has_pos = std::find(y_true.begin(), y_true.end(), 1) != y_true.end();
      const bool has_neg = std::find(y_true.begin(), y_true.end(), 0) != y_true.end();
      if (!has_pos || !has_neg) return {0.5, true};
      return {Auc(y_true, probabilities), false};
    }
  }
  return {};
}

std::vector<std::pair<size_t, size_t>> DefaultGapPairs(size_t n_models) {
  std::vector<std::pair<size_t, size_t>> out;
  for (size_t step = 1; step < n_models; ++step) {
    for (size_t a = 0; a + step < n_models; ++a) out.emplace_back(a, a + step);
  }
  return out;
}

namespace {

Interval Percentile(std::vector<double> values, double point, double confidence) {
  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - confidence) / 2.0;
  Interval ci;
  ci.point = point;
  ci.lo = std::min(point, features::SortedPercentile(values, 100.0 * alpha));
  ci.hi = std::max(point, features::SortedPercentile(values, 100.0 * (1.0 - alpha)));
  return ci;
}

}  // namespace

BootstrapResult BootstrapCompare(const MetricSpec& spec, std::span<const int> y_true,
                                 const std::vector<std::string>& names,
                                 const std::vector<std::vector<double>>& probabilities,
                                 const std::vector<std::pair<size_t, size_t>>& gap_pairs,
                                 const BootstrapOptions& options) {
  if (options.n_resamples < 100) throw InvalidArgument("bootstrap needs at least 100 resamples");
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) throw InvalidArgument("confidence must be in (0, 1)");
  if (names.size() != probabilities.size()) throw InvalidArgument("model names and predictions differ in count");
  const size_t n = y_true.size();
  if (n == 0) throw InvalidArgument("no evaluation rows");
  for (const auto& p : probabilities) {
    if (p.size() != n) throw InvalidArgument("prediction length differs from outcome length");
  }
  for (const auto& [a, b] : gap_pairs) {
    if (a >= names.size() || b >= names.size()) throw InvalidArgument("gap pair index out of range");
  }
  const size_t m = names.size();
  const size_t b_count = static_cast<size_t>(options.n_resamples);
  std::vector<double> values(b_count * m);
  std::vector<uint8_t> degenerate(b_count * m);
  const bool counts_only = spec.metric == Metric::kMcc || spec.metric == Metric::kF1;
  std::vector<std::vector<int>> labels;
  if (counts_only) {
    for (const auto& p : probabilities) labels.push_back(Classify(p, spec.threshold));
  }

  ParallelFor(b_count, [&](size_t b) {
    Rng rng(DeriveSeed(options.seed, b));
    std::vector<size_t> idx(n);
    for (auto& i : idx) i = static_cast<size_t>(rng.Below(n));
    if (counts_only) {
      for (size_t k = 0; k < m; ++k) {
        Confusion c;
        for (size_t i : idx) {
          const bool t = y_true[i] != 0;
          const bool p = labels[k][i] != 0;
          if (t && p) ++c.tp;
          else if (!t && p) ++c.fp;
          else if (!t && !p) ++c.tn;
          else ++c.fn;
        }
        if (spec.metric == Metric::kMcc) {
          values[b * m + k] = Mcc(c);
          degenerate[b * m + k] = MccDegenerate(c);
        } else {
          values[b * m + k] = F1(c, true);
        }
      }
      return;
    }
    std::vector<int> y(n);
    std::vector<double> p(n);
    for (size_t i = 0; i < n; ++i) y[i] = y_true[idx[i]];
    for (size_t k = 0; k < m; ++k) {
      for (size_t i = 0; i < n; ++i) p[i] = probabilities[k][idx[i]];
      const MetricValue v = Evaluate(spec, y, p);
      values[b * m + k] = v.value;
      degenerate[b * m + k] = v.degenerate;
    }
  }, 8);

  BootstrapResult result;
  std::vector<double> point(m);
  for (size_t k = 0; k < m; ++k) {
    point[k] = Evaluate(spec, y_true, probabilities[k]).value;
    std::vector<double> col(b_count);
    int deg = 0;
    for (size_t b = 0; b < b_count; ++b) {
      col[b] = values[b * m + k];
      deg += degenerate[b * m + k];
    }
    result.models.push_back({names[k], spec.metric, Percentile(std::move(col), point[k], options.confidence),
                             options.n_resamples, deg});
  }
  for (const auto& [a, b2] : gap_pairs) {
    std::vector<double> diff(b_count);
    for (size_t b = 0; b < b_count; ++b) diff[b] = values[b * m + b2] - values[b * m + a];
    result.gaps.push_back({names[a], names[b2], spec.metric,
                           Percentile(std::move(diff), point[b2] - point[a], options.confidence)});
  }
  return result;
}

}  // namespace predgap::evalgap
