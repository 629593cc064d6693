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

#include "features/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace predgap::features {

namespace {

std::vector<double> Present(const OptionalColumn& values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) {
    if (v) out.push_back(*v);
  }
  return out;
}

OptionalColumn Wrap(std::span<const double> values) {
  return OptionalColumn(values.begin(), values.end());
}

std::vector<double> Unwrap(const OptionalColumn& values) {
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = *values[i];
  return out;
}

}  // namespace

OptionalColumn RankTransform(const OptionalColumn& values) {
  std::vector<size_t> order;
  order.reserve(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i]) order.push_back(i);
  }
  if (order.empty()) throw InvalidArgument("rank transform of an all-missing column");
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return *values[a] < *values[b]; });
  const double n = static_cast<double>(order.size());
  OptionalColumn out(values.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && *values[order[j + 1]] == *values[order[i]]) ++j;
    // Positions i..j (0-based) hold ties; 1-based midrank.
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) out[order[k]] = midrank / n;
    i = j + 1;
  }
  return out;
}

OptionalColumn RankAgainst(const OptionalColumn& values, std::span<const double> reference) {
  if (reference.empty()) throw InvalidArgument("rank reference is empty");
  std::vector<double> sorted(reference.begin(), reference.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  OptionalColumn out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) continue;
    const double v = *values[i];
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), v);
    const auto hi = std::upper_bound(lo, sorted.end(), v);
    const double below = static_cast<double>(lo - sorted.begin());
    const double equal = static_cast<double>(hi - lo);
    out[i] = equal > 0 ? (below + 0.5 * (equal + 1.0)) / n : below / n;
  }
  return out;
}

OptionalColumn MinMaxScale(const OptionalColumn& values) {
  const auto present = Present(values);
  if (present.empty()) throw InvalidArgument("min-max scaling of an all-missing column");
  const auto [mn, mx] = std::minmax_element(present.begin(), present.end());
  if (!(*mx > *mn)) throw InvalidArgument("min-max scaling of a constant column");
  const double lo = *mn;
  const double range = *mx - *mn;
  OptionalColumn out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i]) out[i] = (*values[i] - lo) / range;
  }
  return out;
}

OptionalColumn ZScore(const OptionalColumn& values) {
  const auto mean = Mean(values);
  const auto sd = PopulationStd(values);
  if (!mean) throw InvalidArgument("z-score of an all-missing column");
  if (!(*sd > 0.0)) throw InvalidArgument("z-score of a constant column");
  OptionalColumn out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i]) out[i] = (*values[i] - *mean) / *sd;
  }
  return out;
}

OptionalColumn LogTransform(const OptionalColumn& values) {
  OptionalColumn out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) continue;
    if (*values[i] < 0.0) throw InvalidArgument("log transform of a negative value");
    out[i] = std::log1p(*values[i]);
  }
  return out;
}

std::vector<double> RankTransform(std::span<const double> values) {
  return Unwrap(RankTransform(Wrap(values)));
}
std::vector<double> MinMaxScale(std::span<const double> values) {
  return Unwrap(MinMaxScale(Wrap(values)));
}
std::vector<double> ZScore(std::span<const double> values) {
  return Unwrap(ZScore(Wrap(values)));
}
std::vector<double> LogTransform(std::span<const double> values) {
  return Unwrap(LogTransform(Wrap(values)));
}

std::optional<double> Mean(const OptionalColumn& values) {
  double sum = 0.0;
  size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> PopulationStd(const OptionalColumn& values) {
  const auto mean = Mean(values);
  if (!mean) return std::nullopt;
  double ss = 0.0;
  size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      ss += (*v - *mean) * (*v - *mean);
      ++n;
    }
  }
  return std::sqrt(ss / static_cast<double>(n));
}

std::optional<double> Median(const OptionalColumn& values) {
  auto present = Present(values);
  if (present.empty()) return std::nullopt;
  std::sort(present.begin(), present.end());
  return SortedPercentile(present, 50.0);
}

double SortedPercentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("percentile of an empty vector");
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q / 100.0;
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace predgap::features
