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

#include <cmath>

#include "common/error.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "model_gnn/gnn_model.hpp"
#include "oracles.hpp"

using namespace predgap;
using namespace predgap::model_gnn;

namespace {

GnnConfig Small(Aggregator agg, CrossTypeMerge cross, bool norm, double dropout) {
  GnnConfig c;
  c.hidden_dim = 3;
  c.dropout = dropout;
  c.cross_type = cross;
  c.layer_normalize = norm;
  c.aggregators.fill(agg);
  c.rng_seed = 11;
  return c;
}

// Non-zero biases so ReLU kinks and max ties are away from the probe points.
GnnModel Perturbed(const HeteroGraph& g, const GnnConfig& c) {
  GnnModel m = InitGnn(g, c);
  for (auto& p : m.params) {
    if (p.value.rows() == 1) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = 0.1 * static_cast<double>(i % 3) - 0.05;
    }
  }
  return m;
}

HeteroGraph SplitToy(uint64_t seed, size_t n_children) {
  HeteroGraph g = testing::ToyGraph(seed, n_children, n_children);
  for (size_t i = 0; i < g.split.size(); ++i) {
    g.split[i] = i % 5 == 0 ? hetgraph::SplitLabel::kValidation
                            : (i % 7 == 0 ? hetgraph::SplitLabel::kTest : hetgraph::SplitLabel::kTrain);
  }
  return g;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  const HeteroGraph g = testing::ToyGraph(3);
  std::vector<uint8_t> mask(g.child_ids.size(), 1);
  mask[3] = 0;
  for (auto agg : {Aggregator::kMean, Aggregator::kMax, Aggregator::kConcat}) {
    for (auto cross : {CrossTypeMerge::kMean, CrossTypeMerge::kConcat}) {
      for (bool norm : {false, true}) {
        for (double dropout : {0.0, 0.2}) {
          CAPTURE(AggregatorName(agg));
          CAPTURE(CrossTypeMergeName(cross));
          CAPTURE(norm);
          CAPTURE(dropout);
          const auto check = oracle::CheckGnnGradients(Perturbed(g, Small(agg, cross, norm, dropout)), g, mask);
          CAPTURE(check.worst_block);
          CHECK(check.worst_relative <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("mixed aggregators per relation") {
  const HeteroGraph g = testing::ToyGraph(8);
  const std::vector<uint8_t> mask(g.child_ids.size(), 1);
  GnnConfig c = Small(Aggregator::kMean, CrossTypeMerge::kConcat, true, 0.1);
  c.aggregators = {Aggregator::kMax, Aggregator::kMean, Aggregator::kConcat, Aggregator::kMax, Aggregator::kMean};
  CHECK(oracle::CheckGnnGradients(Perturbed(g, c), g, mask).worst_relative <= 1e-4);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const HeteroGraph g = SplitToy(5, 60);
  GnnConfig c;
  c.max_epochs = 40;
  c.patience = 40;
  TrainingHistory h1, h2;
  const GnnModel a = FitGnn(g, c, &h1);
  const GnnModel b = FitGnn(g, c, &h2);
  CHECK(PredictProba(a, g) == PredictProba(b, g));
  CHECK(h1.train_loss == h2.train_loss);
  REQUIRE(h1.train_loss.size() >= 2);
  CHECK(h1.train_loss.back() < h1.train_loss.front());
  CHECK(h1.best_epoch >= 0);
  CHECK(h1.best_validation_loss == doctest::Approx(h1.validation_loss[static_cast<size_t>(h1.best_epoch)]));

  GnnConfig other = c;
  other.rng_seed = 2;
  CHECK(PredictProba(FitGnn(g, other), g) != PredictProba(a, g));
}

TEST_CASE("test labels do not influence training") {
  HeteroGraph g = SplitToy(6, 60);
  GnnConfig c;
  c.max_epochs = 15;
  const auto before = PredictProba(FitGnn(g, c), g);
  for (size_t i = 0; i < g.split.size(); ++i) {
    if (g.split[i] == hetgraph::SplitLabel::kTest) g.outcomes[i] = 1 - g.outcomes[i];
  }
  CHECK(PredictProba(FitGnn(g, c), g) == before);
}

TEST_CASE("gnn persistence and embeddings") {
  testing::TempDir dir("gnn");
  const HeteroGraph g = SplitToy(9, 40);
  GnnConfig c;
  c.max_epochs = 5;
  TrainingHistory h;
  const GnnModel m = FitGnn(g, c, &h);
  SaveGnnModel(m, dir / "m.bin");
  const GnnModel back = LoadGnnModel(dir / "m.bin");
  CHECK(PredictProba(back, g) == PredictProba(m, g));
  const RowMatrix e = Embeddings(m, g);
  CHECK(e.rows() == static_cast<Eigen::Index>(g.child_ids.size()));
  CHECK(e.cols() > 0);
  CHECK(GnnMetaJson(m, h).contains("config"));
  WriteFile(dir / "junk.bin", "not a model");
  CHECK_THROWS(LoadGnnModel(dir / "junk.bin"));
}

TEST_CASE("gnn config ranges") {
  GnnConfig c;
  CHECK_NOTHROW(c.ValidateRanges());
  c.hidden_dim = 8;
  CHECK_THROWS_AS(c.ValidateRanges(), ConfigError);
  c = GnnConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  CHECK(GnnConfig::FromJson(GnnConfig{}.ToJson()).ToJson() == GnnConfig{}.ToJson());
  CHECK_THROWS(ParseAggregator("sum"));
}
