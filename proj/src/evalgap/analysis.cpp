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

#include "evalgap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace predgap::evalgap {

namespace {

std::vector<size_t> Shuffled(std::span<const size_t> rows, uint64_t seed) {
  std::vector<size_t> v(rows.begin(), rows.end());
  Rng rng(seed);
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<size_t>(rng.Below(i))]);
  return v;
}

std::pair<std::vector<size_t>, std::vector<size_t>> Partition(std::span<const size_t> rows, uint64_t seed,
                                                              double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  std::vector<size_t> v = Shuffled(rows, seed);
  const size_t cut = static_cast<size_t>(std::llround(static_cast<double>(v.size()) * fraction));
  std::vector<size_t> a(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<size_t> b(v.begin() + static_cast<std::ptrdiff_t>(cut), v.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {std::move(a), std::move(b)};
}

}  // namespace

Json SplitSpec::ToJson() const {
  return Json{{"seed", seed}, {"train_fraction", train_fraction}, {"n_train", train.size()},
              {"n_test", test.size()}, {"train", train}, {"test", test}};
}

SplitSpec SplitSpec::FromJson(const Json& j) {
  SplitSpec s;
  s.seed = j.at("seed").get<uint64_t>();
  s.train_fraction = j.at("train_fraction").get<double>();
  s.train = j.at("train").get<std::vector<size_t>>();
  s.test = j.at("test").get<std::vector<size_t>>();
  return s;
}

SplitSpec MakeSplit(size_t n, uint64_t seed, double train_fraction) {
  if (n < 2) throw InvalidArgument("split needs at least two rows");
  std::vector<size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  SplitSpec s;
  s.seed = seed;
  s.train_fraction = train_fraction;
  std::tie(s.train, s.test) = Partition(all, seed, train_fraction);
  return s;
}

std::pair<std::vector<size_t>, std::vector<size_t>> InnerSplit(std::span<const size_t> rows, uint64_t seed,
                                                               double fit_fraction) {
  return Partition(rows, DeriveSeed(seed, 0x1a2b), fit_fraction);
}

std::vector<std::vector<size_t>> KFolds(std::span<const size_t> rows, int k, uint64_t seed) {
  if (k < 2 || static_cast<size_t>(k) > rows.size()) throw InvalidArgument("invalid fold count");
  const std::vector<size_t> v = Shuffled(rows, DeriveSeed(seed, 0x3c4d));
  std::vector<std::vector<size_t>> folds(static_cast<size_t>(k));
  for (size_t i = 0; i < v.size(); ++i) folds[i % static_cast<size_t>(k)].push_back(v[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

GroupAssignment AssignGroups(std::span<const std::optional<double>> values, const SubgroupSpec& spec) {
  GroupAssignment ga;
  ga.group.assign(values.size(), -1);
  const bool any_missing = std::any_of(values.begin(), values.end(), [](const auto& v) { return !v.has_value(); });
  if (spec.binning == Binning::kCategorical) {
    std::vector<double> codes;
    for (const auto& v : values) {
      if (v) codes.push_back(*v);
    }
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    for (double c : codes) {
      const auto it = spec.labels.find(c);
      ga.labels.push_back(it != spec.labels.end() ? it->second : FormatDouble(c));
    }
    for (size_t i = 0; i < values.size(); ++i) {
      if (values[i]) {
        ga.group[i] = static_cast<int>(std::lower_bound(codes.begin(), codes.end(), *values[i]) - codes.begin());
      }
    }
  } else {
    if (spec.n_bins < 1) throw ConfigError("subgroup n_bins must be >= 1");
    std::vector<size_t> order;
    for (size_t i = 0; i < values.size(); ++i) {
      if (values[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return *values[a] < *values[b]; });
    const size_t n = order.size();
    const size_t k = std::min<size_t>(static_cast<size_t>(spec.n_bins), std::max<size_t>(n, 1));
    for (size_t b = 0; b < k; ++b) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "q%02zu", b + 1);
      ga.labels.emplace_back(buf);
    }
    for (size_t r = 0; r < n; ++r) ga.group[order[r]] = static_cast<int>(r * k / n);
  }
  if (any_missing) {
    const int missing = static_cast<int>(ga.labels.size());
    ga.labels.emplace_back("missing");
    for (size_t i = 0; i < values.size(); ++i) {
      if (!values[i]) ga.group[i] = missing;
    }
  }
  return ga;
}

Disaggregation Disaggregate(const SubgroupSpec& spec, std::span<const std::optional<double>> values,
                            std::span<const int> y_true, const std::vector<std::string>& names,
                            const std::vector<std::vector<double>>& probabilities,
                            const std::vector<std::pair<size_t, size_t>>& gap_pairs, const MetricSpec& metric,
                            const BootstrapOptions& options) {
  if (values.size() != y_true.size()) throw InvalidArgument("grouping variable length differs from outcomes");
  const GroupAssignment ga = AssignGroups(values, spec);
  Disaggregation d;
  d.spec = spec;
  d.models = names;
  bool any = false;
  for (size_t g = 0; g < ga.labels.size(); ++g) {
    std::vector<size_t> rows;
    for (size_t i = 0; i < ga.group.size(); ++i) {
      if (ga.group[i] == static_cast<int>(g)) rows.push_back(i);
    }
    GroupReport gr;
    gr.label = ga.labels[g];
    gr.n = rows.size();
    if (rows.size() < static_cast<size_t>(spec.min_size)) {
      gr.suppressed = true;
      d.groups.push_back(std::move(gr));
      continue;
    }
    std::vector<int> y(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) y[i] = y_true[rows[i]];
    std::vector<std::vector<double>> p(probabilities.size(), std::vector<double>(rows.size()));
    for (size_t k = 0; k < probabilities.size(); ++k) {
      for (size_t i = 0; i < rows.size(); ++i) p[k][i] = probabilities[k][rows[i]];
    }
    BootstrapOptions o = options;
    o.seed = DeriveSeed(options.seed, g);
    gr.result = BootstrapCompare(metric, y, names, p, gap_pairs, o);
    any = true;
    d.groups.push_back(std::move(gr));
  }
  if (!any) {
    throw InvalidArgument("every subgroup of '" + spec.variable + "' is below the minimum size " +
                          std::to_string(spec.min_size));
  }
  return d;
}

void WriteDisaggregationCsv(const Disaggregation& d, const std::filesystem::path& path) {
  CsvWriter w(path);
  std::vector<std::string> header = {"group", "n", "model", "mcc", "ci_lo", "ci_hi"};
  std::vector<std::string> gap_names;
  const BootstrapResult* first = nullptr;
  for (const auto& g : d.groups) {
    if (!g.suppressed) {
      first = &g.result;
      break;
    }
  }
  if (first) {
    for (const auto& gap : first->gaps) {
      const std::string base = "gap_" + gap.model_b + "_" + gap.model_a;
      header.insert(header.end(), {base, base + "_lo", base + "_hi"});
      gap_names.push_back(base);
    }
  }
  w.WriteRow(header);
  for (const auto& g : d.groups) {
    for (size_t k = 0; k < d.models.size(); ++k) {
      std::vector<std::string> row = {g.label, std::to_string(g.n), d.models[k]};
      if (g.suppressed) {
        row.resize(header.size());
      } else {
        const auto& ci = g.result.models[k].ci;
        row.insert(row.end(), {FormatDouble(ci.point), FormatDouble(ci.lo), FormatDouble(ci.hi)});
        for (const auto& gap : g.result.gaps) {
          row.insert(row.end(), {FormatDouble(gap.ci.point), FormatDouble(gap.ci.lo), FormatDouble(gap.ci.hi)});
        }
      }
      w.WriteRow(row);
    }
  }
  w.Close();
}

namespace {

Json IntervalJson(const Interval& ci) { return Json{{"point", ci.point}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}}; }

}  // namespace

Json EvalReport::ToJson() const {
  Json j;
  j["run"] = run;
  j["n_test"] = n_test;
  j["threshold"] = threshold;
  j["bootstrap"] = {{"n_resamples", options.n_resamples}, {"seed", options.seed},
                    {"confidence", options.confidence}, {"method", "percentile, paired resamples"}};
  Json est = Json::array();
  for (const auto& e : estimates) {
    Json row = {{"model", e.model}, {"metric", MetricName(e.metric)}};
    row.update(IntervalJson(e.ci));
    row["n_resamples"] = e.n_resamples;
    row["degenerate_resamples"] = e.degenerate;
    est.push_back(std::move(row));
  }
  j["estimates"] = std::move(est);
  Json gj = Json::array();
  for (const auto& g : gaps) {
    Json row = {{"model_a", g.model_a}, {"model_b", g.model_b}, {"metric", MetricName(g.metric)}};
    row.update(IntervalJson(g.ci));
    gj.push_back(std::move(row));
  }
  j["gaps"] = std::move(gj);
  return j;
}

void WriteEvalCsv(const EvalReport& report, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.WriteRow({"model", "metric", "point", "ci_lo", "ci_hi", "n_resamples", "degenerate"});
  for (const auto& e : report.estimates) {
    w.WriteRow({e.model, std::string(MetricName(e.metric)), FormatDouble(e.ci.point), FormatDouble(e.ci.lo),
                FormatDouble(e.ci.hi), std::to_string(e.n_resamples), std::to_string(e.degenerate)});
  }
  w.Close();
}

void WriteGapCsv(const std::vector<GapEstimate>& gaps, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.WriteRow({"model_a", "model_b", "metric", "gap", "ci_lo", "ci_hi"});
  for (const auto& g : gaps) {
    w.WriteRow({g.model_a, g.model_b, std::string(MetricName(g.metric)), FormatDouble(g.ci.point),
                FormatDouble(g.ci.lo), FormatDouble(g.ci.hi)});
  }
  w.Close();
}

void WriteAgreementCsv(const std::vector<NamedAgreement>& rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.WriteRow({"model_a", "model_b", "n", "both_agreeing", "both_correct", "both_wrong", "only_a_correct",
              "only_b_correct"});
  for (const auto& r : rows) {
    const auto& t = r.table;
    w.WriteRow({r.model_a, r.model_b, std::to_string(t.n), std::to_string(t.both_agreeing),
                std::to_string(t.both_correct), std::to_string(t.both_wrong), std::to_string(t.only_a_correct),
                std::to_string(t.only_b_correct)});
  }
  w.Close();
}

void WriteSweepCsv(const std::vector<NamedSweep>& sweeps, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.WriteRow({"model", "threshold", "f1_positive", "f1_negative"});
  for (const auto& s : sweeps) {
    for (const auto& p : s.points) {
      w.WriteRow({s.model, FormatDouble(p.threshold), FormatDouble(p.f1_positive), FormatDouble(p.f1_negative)});
    }
  }
  w.Close();
}

void WriteNestedCsv(const std::vector<NestedRow>& rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.WriteRow({"context", "label", "model", "n_features", "mcc", "ci_lo", "ci_hi", "default_config"});
  for (const auto& r : rows) {
    w.WriteRow({r.context, r.label, r.model, std::to_string(r.n_features), FormatDouble(r.mcc.point),
                FormatDouble(r.mcc.lo), FormatDouble(r.mcc.hi), r.default_config ? "1" : "0"});
  }
  w.Close();
}

}  // namespace predgap::evalgap
