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

#ifndef PREDGAP_TUNER_SEARCH_HPP_
#define PREDGAP_TUNER_SEARCH_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/io.hpp"
#include "common/rng.hpp"
#include "hetgraph/hetero_graph.hpp"
#include "model_gbt/boost_model.hpp"
#include "model_gnn/gnn_model.hpp"

namespace predgap::tuner {

enum class DomainKind : uint8_t { kContinuous, kInteger, kCategorical };

struct Domain {
  std::string name;
  DomainKind kind = DomainKind::kContinuous;
  double lo = 0.0;
  double hi = 0.0;
  bool log = false;
  std::vector<std::string> choices;

  static Domain Continuous(std::string name, double lo, double hi, bool log = false);
  static Domain Integer(std::string name, int lo, int hi);
  static Domain Categorical(std::string name, std::vector<std::string> choices);

  Json Sample(Rng& rng) const;
  bool Contains(const Json& value) const;
  Json ToJson() const;
};

struct SearchSpace {
  std::vector<Domain> domains;
  int budget = 40;
  uint64_t rng_seed = 7;

  // Learning rate [0.01, 1] log, iterations [50, 200], leaf nodes [2, 50],
  // min samples per leaf [1, 100], depth [1, 20].
  static SearchSpace Gbt(int budget, uint64_t seed);
  // Hidden size [16, 64], dropout [0.1, 0.3], learning rate [0.01, 0.1] log,
  // one aggregator per relation, cross-type merge, layer normalization.
  static SearchSpace Gnn(int budget, uint64_t seed);

  // The whole trial sequence, drawn up front so results do not depend on
  // execution order.
  std::vector<Json> TrialList() const;
  Json ToJson() const;
};

struct Trial {
  int id = 0;
  std::string source;  // "fixed" or "random"
  Json params;
  std::optional<double> val_loss;  // empty when the trial failed
  double seconds = 0.0;
  std::string error;
};

struct TrialLog {
  std::vector<std::string> param_names;
  std::vector<Trial> trials;
  int best = -1;

  void Append(Trial trial);
  const Trial& Best() const;
  // tuning_log.csv: trial, source, one column per parameter, val_loss,
  // seconds, status. Seconds stay blank unless `with_seconds`, which keeps
  // the file byte-stable across reruns.
  void WriteCsv(const std::filesystem::path& path, bool with_seconds = false) const;
};

struct TuneOptions {
  // Evaluated ahead of the sampled trials, for example a default config
  // serving as a baseline. Not counted against the budget.
  std::vector<Json> fixed_trials;
  // Seed for the inner validation split or folds.
  uint64_t split_seed = 11;
};

// Returns the validation loss of one configuration. Exceptions mark the
// trial as failed.
using Objective = std::function<double(const Json& params)>;

// Random search. Throws InvalidArgument if budget < 1 and InvariantError
// if every trial failed.
TrialLog RandomSearch(const SearchSpace& space, const Objective& objective, const TuneOptions& options = {});

// Throws InvariantError when any row of `tuning` is in `test`.
void AssertDisjoint(std::span<const size_t> tuning, std::span<const size_t> test, const std::string& what);

model_gbt::GbtParams GbtParamsFrom(const Json& params);
// Overlays sampled keys (including "agg.<relation>") on `base`.
model_gnn::GnnConfig GnnConfigFrom(const model_gnn::GnnConfig& base, const Json& params);
Json FlattenGnnParams(const model_gnn::GnnConfig& config);

struct GbtTuneResult {
  model_gbt::GbtParams best;
  TrialLog log;
};

// Pooled log-loss over `folds`-fold cross-validation of the training rows.
double CrossValidatedLogLoss(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> train_rows,
                             const model_gbt::GbtParams& params, int folds, uint64_t seed,
                             const model_gbt::FitOptions& fit_options = {});

GbtTuneResult TuneGbt(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> train_rows,
                      std::span<const size_t> test_rows, const SearchSpace& space, const TuneOptions& options = {},
                      int folds = 3);

// Marks an 80/20 split of the training children as train/validation and
// the rest as test. Graph children are in row order.
void ApplyInnerSplit(hetgraph::HeteroGraph& graph, std::span<const size_t> train_rows,
                     std::span<const size_t> test_rows, uint64_t seed, double fit_fraction = 0.8);

struct GnnTuneResult {
  model_gnn::GnnConfig best;
  TrialLog log;
};

// Validation loss is the best early-stopping loss on the held-out 20% of the
// training children.
GnnTuneResult TuneGnn(hetgraph::HeteroGraph graph, std::span<const size_t> train_rows,
                      std::span<const size_t> test_rows, const model_gnn::GnnConfig& base, const SearchSpace& space,
                      const TuneOptions& options = {});

// Reference boosting configurations for the six nested contexts, in
// context order.
std::vector<std::pair<std::string, model_gbt::GbtParams>> ReferenceGbtConfigs();

}  // namespace predgap::tuner

#endif  // PREDGAP_TUNER_SEARCH_HPP_
