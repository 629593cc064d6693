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

#include "synthpop/summary.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "common/error.hpp"
#include "common/io.hpp"
#include "features/feature_table.hpp"
#include "features/transforms.hpp"

namespace predgap::synthpop {

SummaryRow SummarizeColumn(const std::string& name, const std::vector<std::optional<double>>& values) {
  SummaryRow row;
  row.variable = name;
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  row.n = present.size();
  if (present.empty()) return row;
  std::sort(present.begin(), present.end());
  row.n_distinct = std::set<double>(present.begin(), present.end()).size();
  row.mean = *features::Mean(values);
  row.std = *features::PopulationStd(values);
  row.p1 = features::SortedPercentile(present, 1);
  row.p10 = features::SortedPercentile(present, 10);
  row.p50 = features::SortedPercentile(present, 50);
  row.p90 = features::SortedPercentile(present, 90);
  row.p99 = features::SortedPercentile(present, 99);
  return row;
}

SummaryTable RegistrySummary(const Registry& registry) {
  if (registry.children.empty()) throw InvalidArgument("registry summary needs a nonempty registry");
  const features::RegistryView view(registry);
  const auto raw = features::RawInputColumns(view);
  const auto& vars = features::InputVariables();
  SummaryTable table;
  for (size_t k = 0; k < vars.size(); ++k) table.push_back(SummarizeColumn(vars[k].name, raw[k]));
  return table;
}

void WriteSummaryCsv(const SummaryTable& table, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.WriteRow({"variable", "n_values", "N", "mean", "std", "p1", "p10", "p50", "p90", "p99"});
  for (const auto& r : table) {
    const std::string distinct =
        r.n_distinct > kMaxDiscreteValues ? std::string("Cont") : std::to_string(r.n_distinct);
    w.WriteRow({r.variable, distinct, std::to_string(r.n), FormatDouble(r.mean), FormatDouble(r.std),
                FormatDouble(r.p1), FormatDouble(r.p10), FormatDouble(r.p50), FormatDouble(r.p90),
                FormatDouble(r.p99)});
  }
  w.Close();
}

}  // namespace predgap::synthpop
