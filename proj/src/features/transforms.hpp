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

#ifndef PREDGAP_FEATURES_TRANSFORMS_HPP_
#define PREDGAP_FEATURES_TRANSFORMS_HPP_

#include <optional>
#include <span>
#include <vector>

namespace predgap::features {

using OptionalColumn = std::vector<std::optional<double>>;

enum class RankReference { kPopulation, kSample };

// midrank / N over the non-missing entries; ties share the average of their
// 1-based positions. Missing stays missing. Throws InvalidArgument when every
// entry is missing.
OptionalColumn RankTransform(const OptionalColumn& values);

// Ranks `values` against a separate reference population: each value maps
// to (count_below + (count_equal + 1) / 2) / N_reference when it occurs in
// the reference, and to the fraction of reference values <= it otherwise.
OptionalColumn RankAgainst(const OptionalColumn& values, std::span<const double> reference);

// Affine map min -> 0, max -> 1. Throws InvalidArgument on a constant column.
OptionalColumn MinMaxScale(const OptionalColumn& values);

// Mean 0, population standard deviation 1. Throws InvalidArgument on a
// constant column.
OptionalColumn ZScore(const OptionalColumn& values);

// log(1 + x); throws InvalidArgument for x < 0.
OptionalColumn LogTransform(const OptionalColumn& values);

// Convenience wrappers for complete vectors.
std::vector<double> RankTransform(std::span<const double> values);
std::vector<double> MinMaxScale(std::span<const double> values);
std::vector<double> ZScore(std::span<const double> values);
std::vector<double> LogTransform(std::span<const double> values);

// Population statistics over non-missing entries; nullopt when none.
std::optional<double> Mean(const OptionalColumn& values);
std::optional<double> PopulationStd(const OptionalColumn& values);
std::optional<double> Median(const OptionalColumn& values);

// Linear-interpolation percentile (q in [0,100]) of a sorted vector:
// position (n - 1) * q / 100.
double SortedPercentile(std::span<const double> sorted, double q);

}  // namespace predgap::features

#endif  // PREDGAP_FEATURES_TRANSFORMS_HPP_
