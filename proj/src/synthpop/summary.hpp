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

#ifndef PREDGAP_SYNTHPOP_SUMMARY_HPP_
#define PREDGAP_SYNTHPOP_SUMMARY_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synthpop/registry.hpp"

namespace predgap::synthpop {

// One summary-table row. Percentiles use linear interpolation between order
// statistics; std is the population standard deviation.
struct SummaryRow {
  std::string variable;
  size_t n_distinct = 0;
  size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double p1 = 0.0, p10 = 0.0, p50 = 0.0, p90 = 0.0, p99 = 0.0;
};

using SummaryTable = std::vector<SummaryRow>;

// Up to this many distinct values the "# values" column shows the count;
// above it, "Cont".
inline constexpr size_t kMaxDiscreteValues = 10;

SummaryRow SummarizeColumn(const std::string& name, const std::vector<std::optional<double>>& values);

// Descriptive summary over the raw (pre-transform) model inputs, rows in the
// I, F, E, H, S, N order. Throws InvalidArgument on an empty registry.
SummaryTable RegistrySummary(const Registry& registry);

void WriteSummaryCsv(const SummaryTable& table, const std::filesystem::path& path);

}  // namespace predgap::synthpop

#endif  // PREDGAP_SYNTHPOP_SUMMARY_HPP_
