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

#include "tuner/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "common/error.hpp"
#include "common/logistic.hpp"
#include "common/rng.hpp"
#include "evalgap/analysis.hpp"
#include "evalgap/metrics.hpp"

namespace predgap::tuner {

using model_gbt::GbtParams;
using model_gnn::GnnConfig;

Domain Domain::Continuous(std::string name, double lo, double hi, bool log) {
  if (!(lo < hi) || (log && lo <= 0.0)) throw ConfigError("bad continuous domain '" + name + "'");
  return Domain{std::move(name), DomainKind::kContinuous, lo, hi, log, {}};
}

Domain Domain::Integer(std::string name, int lo, int hi) {
  if (lo > hi) throw ConfigError("bad integer domain '" + name + "'");
  return Domain{std::move(name), DomainKind::kInteger, static_cast<double>(lo), static_cast<double>(hi), false, {}};
}

Domain Domain::Categorical(std::string name, std::vector<std::string> choices) {
  if (choices.empty()) throw ConfigError("empty categorical domain '" + name + "'");
  return Domain{std::move(name), DomainKind::kCategorical, 0.0, 0.0, false, std::move(choices)};
}

Json Domain::Sample(Rng& rng) const {
  switch (kind) {
    case DomainKind::kContinuous:
      if (log) return std::exp(rng.Uniform(std::log(lo), std::log(hi)));
      return rng.Uniform(lo, hi);
    case DomainKind::kInteger: {
      const auto span = static_cast<uint64_t>(hi - lo) + 1;
      return static_cast<int>(lo) + static_cast<int>(rng.Below(span));
    }
    case DomainKind::kCategorical:
      return choices[static_cast<size_t>(rng.Below(choices.size()))];
  }
  return nullptr;
}

bool Domain::Contains(const Json& value) const {
  switch (kind) {
    case DomainKind::kContinuous:
      return value.is_number() && value.get<double>() >= lo && value.get<double>() <= hi;
    case DomainKind::kInteger:
      return value.is_number_integer() && value.get<double>() >= lo && value.get<double>() <= hi;
    case DomainKind::kCategorical:
      return value.is_string() && std::find(choices.begin(), choices.end(), value.get<std::string>()) != choices.end();
  }
  return false;
}

Json Domain::ToJson() const {
  Json j{{"name", name}};
  switch (kind) {
    case DomainKind::kContinuous:
      j["kind"] = "continuous";
      j["lo"] = lo;
      j["hi"] = hi;
      j["log"] = log;
      break;
    case DomainKind::kInteger:
      j["kind"] = "integer";
      j["lo"] = static_cast<int>(lo);
      j["hi"] = static_cast<int>(hi);
      break;
    case DomainKind::kCategorical:
      j["kind"] = "categorical";
      j["choices"] = choices;
      break;
  }
  return j;
}

SearchSpace SearchSpace::Gbt(int budget, uint64_t seed) {
  SearchSpace s;
  s.budget = budget;
  s.rng_seed = seed;
  s.domains = {Domain::Continuous("learning_rate", 0.01, 1.0, true), Domain::Integer("max_iterations", 50, 200),
               Domain::Integer("max_leaf_nodes", 2, 50), Domain::Integer("min_samples_leaf", 1, 100),
               Domain::Integer("max_depth", 1, 20)};
  return s;
}

SearchSpace SearchSpace::Gnn(int budget, uint64_t seed) {
  SearchSpace s;
  s.budget = budget;
  s.rng_seed = seed;
  s.domains = {Domain::Integer("hidden_dim", 16, 64), Domain::Continuous("dropout", 0.1, 0.3),
               Domain::Continuous("learning_rate", 0.01, 0.1, true)};
  for (auto r : synthpop::kAllRelations) {
    s.domains.push_back(Domain::Categorical("agg." + std::string(synthpop::RelationName(r)), {"mean", "max", "concat"}));
  }
  s.domains.push_back(Domain::Categorical("cross_type", {"mean", "cat"}));
  s.domains.push_back(Domain::Categorical("layer_normalize", {"true", "false"}));
  return s;
}

std::vector<Json> SearchSpace::TrialList() const {
  if (budget < 1) throw InvalidArgument("tuning budget must be >= 1");
  std::vector<Json> out;
  out.reserve(static_cast<size_t>(budget));
  for (int t = 0; t < budget; ++t) {
    Rng rng(DeriveSeed(rng_seed, static_cast<uint64_t>(t)));
    Json p = Json::object();
    for (const auto& d : domains) p[d.name] = d.Sample(rng);
    out.push_back(std::move(p));
  }
  return out;
}

Json SearchSpace::ToJson() const {
  Json d = Json::array();
  for (const auto& dom : domains) d.push_back(dom.ToJson());
  return Json{{"strategy", "random"}, {"budget", budget}, {"rng_seed", rng_seed}, {"domains", d}};
}

void TrialLog::Append(Trial trial) {
  trials.push_back(std::move(trial));
  const Trial& t = trials.back();
  if (t.val_loss && (best < 0 || *t.val_loss < *trials[static_cast<size_t>(best)].val_loss)) {
    best = static_cast<int>(trials.size()) - 1;
  }
}

const Trial& TrialLog::Best() const {
  if (best < 0) throw InvariantError("no successful tuning trial");
  return trials[static_cast<size_t>(best)];
}

namespace {

std::string ParamText(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<int64_t>());
  return FormatDouble(v.get<double>());
}

}  // namespace

void TrialLog::WriteCsv(const std::filesystem::path& path, bool with_seconds) const {
  CsvWriter w(path);
  std::vector<std::string> header = {"trial", "source"};
  header.insert(header.end(), param_names.begin(), param_names.end());
  header.insert(header.end(), {"val_loss", "seconds", "status"});
  w.WriteRow(header);
  for (const auto& t : trials) {
    std::vector<std::string> row = {std::to_string(t.id), t.source};
    for (const auto& name : param_names) row.push_back(t.params.contains(name) ? ParamText(t.params[name]) : "");
    row.push_back(t.val_loss ? FormatDouble(*t.val_loss) : "");
    row.push_back(with_seconds ? FormatDouble(t.seconds) : "");
    row.push_back(t.val_loss ? (static_cast<int>(&t - trials.data()) == best ? "best" : "ok") : "failed: " + t.error);
    w.WriteRow(row);
  }
  w.Close();
}

TrialLog RandomSearch(const SearchSpace& space, const Objective& objective, const TuneOptions& options) {
  std::vector<std::pair<std::string, Json>> queue;
  for (const auto& p : options.fixed_trials) queue.emplace_back("fixed", p);
  for (auto& p : space.TrialList()) queue.emplace_back("random", std::move(p));

  TrialLog log;
  for (const auto& d : space.domains) log.param_names.push_back(d.name);
  for (size_t i = 0; i < queue.size(); ++i) {
    Trial t;
    t.id = static_cast<int>(i);
    t.source = queue[i].first;
    t.params = queue[i].second;
    const auto start = std::chrono::steady_clock::now();
    try {
      const double loss = objective(t.params);
      if (!std::isfinite(loss)) throw InvariantError("non-finite validation loss");
      t.val_loss = loss;
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.Append(std::move(t));
  }
  if (log.best < 0) throw InvariantError("every tuning trial failed; first error: " + log.trials.front().error);
  return log;
}

void AssertDisjoint(std::span<const size_t> tuning, std::span<const size_t> test, const std::string& what) {
  const std::unordered_set<size_t> t(test.begin(), test.end());
  for (size_t r : tuning) {
    if (t.count(r)) throw InvariantError(what + " uses test row " + std::to_string(r));
  }
}

GbtParams GbtParamsFrom(const Json& params) { return GbtParams::FromJson(params); }

GnnConfig GnnConfigFrom(const GnnConfig& base, const Json& params) {
  Json merged = base.ToJson();
  for (const auto& [key, value] : params.items()) {
    if (key.starts_with("agg.")) {
      merged["aggregators"][key.substr(4)] = value;
    } else if (key == "layer_normalize" && value.is_string()) {
      merged[key] = value.get<std::string>() == "true";
    } else {
      merged[key] = value;
    }
  }
  return GnnConfig::FromJson(merged);
}

Json FlattenGnnParams(const GnnConfig& config) {
  Json j{{"hidden_dim", config.hidden_dim}, {"dropout", config.dropout}, {"learning_rate", config.learning_rate}};
  for (auto r : synthpop::kAllRelations) {
    j["agg." + std::string(synthpop::RelationName(r))] =
        model_gnn::AggregatorName(config.aggregators[static_cast<size_t>(r)]);
  }
  j["cross_type"] = model_gnn::CrossTypeMergeName(config.cross_type);
  j["layer_normalize"] = config.layer_normalize ? "true" : "false";
  return j;
}

double CrossValidatedLogLoss(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> train_rows,
                             const GbtParams& params, int folds, uint64_t seed,
                             const model_gbt::FitOptions& fit_options) {
  const auto parts = evalgap::KFolds(train_rows, folds, seed);
  double total = 0.0;
  size_t count = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    std::vector<size_t> fit;
    for (size_t j = 0; j < parts.size(); ++j) {
      if (j != k) fit.insert(fit.end(), parts[j].begin(), parts[j].end());
    }
    std::sort(fit.begin(), fit.end());
    const auto model = model_gbt::FitGbt(x, y, fit, params, fit_options);
    for (size_t r : parts[k]) {
      const Eigen::VectorXd row = x.row(static_cast<Eigen::Index>(r)).transpose();
      total += LogLossFromLogit(model.Logit({row.data(), static_cast<size_t>(row.size())}), y[r]);
    }
    count += parts[k].size();
  }
  return total / static_cast<double>(count);
}

GbtTuneResult TuneGbt(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> train_rows,
                      std::span<const size_t> test_rows, const SearchSpace& space, const TuneOptions& options,
                      int folds) {
  AssertDisjoint(train_rows, test_rows, "boosting cross-validation");
  const Objective objective = [&](const Json& p) {
    const GbtParams params = GbtParamsFrom(p);
    params.ValidateRanges();
    return CrossValidatedLogLoss(x, y, train_rows, params, folds, options.split_seed);
  };
  GbtTuneResult out;
  out.log = RandomSearch(space, objective, options);
  out.best = GbtParamsFrom(out.log.Best().params);
  return out;
}

void ApplyInnerSplit(hetgraph::HeteroGraph& graph, std::span<const size_t> train_rows,
                     std::span<const size_t> test_rows, uint64_t seed, double fit_fraction) {
  AssertDisjoint(train_rows, test_rows, "graph validation split");
  const size_t n = graph.child_ids.size();
  graph.split.assign(n, hetgraph::SplitLabel::kTest);
  for (size_t r : test_rows) {
    if (r >= n) throw InvalidArgument("test row out of range");
  }
  for (size_t r : train_rows) {
    if (r >= n) throw InvalidArgument("train row out of range");
  }
  const auto [fit, holdout] = evalgap::InnerSplit(train_rows, seed, fit_fraction);
  for (size_t r : fit) graph.split[r] = hetgraph::SplitLabel::kTrain;
  for (size_t r : holdout) graph.split[r] = hetgraph::SplitLabel::kValidation;
}

GnnTuneResult TuneGnn(hetgraph::HeteroGraph graph, std::span<const size_t> train_rows,
                      std::span<const size_t> test_rows, const GnnConfig& base, const SearchSpace& space,
                      const TuneOptions& options) {
  ApplyInnerSplit(graph, train_rows, test_rows, options.split_seed);
  const Objective objective = [&](const Json& p) {
    const GnnConfig config = GnnConfigFrom(base, p);
    model_gnn::TrainingHistory history;
    model_gnn::FitGnn(graph, config, &history);
    return history.best_validation_loss;
  };
  GnnTuneResult out;
  out.log = RandomSearch(space, objective, options);
  out.best = GnnConfigFrom(base, out.log.Best().params);
  return out;
}

std::vector<std::pair<std::string, GbtParams>> ReferenceGbtConfigs() {
  auto make = [](double lr, int iters, int leaves, int min_leaf, int depth) {
    GbtParams p;
    p.learning_rate = lr;
    p.max_iterations = iters;
    p.max_leaf_nodes = leaves;
    p.min_samples_leaf = min_leaf;
    p.max_depth = depth;
    return p;
  };
  return {{"demographics", make(0.664, 105, 13, 49, 2)}, {"nuclear", make(0.059, 167, 13, 48, 11)},
          {"household", make(0.119, 185, 10, 95, 4)},    {"extended", make(0.111, 187, 49, 82, 3)},
          {"school", make(0.073, 197, 15, 45, 4)},       {"neighborhood", make(0.052, 178, 24, 56, 11)}};
}

}  // namespace predgap::tuner
