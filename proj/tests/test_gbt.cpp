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
#include "common/rng.hpp"
#include "doctest.h"
#include "evalgap/metrics.hpp"
#include "fixtures.hpp"
#include "model_gbt/boost_model.hpp"
#include "model_linear/linear_model.hpp"
#include "oracles.hpp"

using namespace predgap;
using namespace predgap::model_gbt;

namespace {

GbtParams StumpParams() {
  GbtParams p;
  p.learning_rate = 1.0;
  p.max_iterations = 1;
  p.max_depth = 1;
  p.max_leaf_nodes = 2;
  p.min_samples_leaf = 1;
  return p;
}

void RandomDataset(uint64_t seed, Eigen::MatrixXd* x, std::vector<int>* y) {
  Rng rng(seed);
  const int n = 20 + static_cast<int>(rng.Below(40));
  const int d = 1 + static_cast<int>(rng.Below(4));
  *x = Eigen::MatrixXd(n, d);
  y->assign(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) (*x)(i, j) = std::round(rng.Normal() * 20) / 4;  // some ties
    (*y)[static_cast<size_t>(i)] = rng.Bernoulli(1 / (1 + std::exp(-(*x)(i, 0)))) ? 1 : 0;
  }
  (*y)[0] = 0;
  (*y)[1] = 1;
}

}  // namespace

TEST_CASE("a depth-one tree is the brute-force best stump") {
  const FitOptions loose{false};
  for (uint64_t s = 0; s < 20; ++s) {
    Eigen::MatrixXd x;
    std::vector<int> y;
    RandomDataset(s, &x, &y);
    const auto rows = testing::AllRows(y.size());
    const BoostModel m = FitGbt(x, y, rows, StumpParams(), loose);
    const oracle::Stump want = oracle::BruteForceStump(x, y);
    REQUIRE(want.feature >= 0);
    REQUIRE(m.trees.size() == 1);
    const auto& root = m.trees[0].nodes[0];
    CHECK(root.feature == want.feature);
    CHECK(root.threshold == want.threshold);
    CHECK(m.trees[0].nodes[root.left].value == doctest::Approx(want.left).epsilon(1e-10));
    CHECK(m.trees[0].nodes[root.right].value == doctest::Approx(want.right).epsilon(1e-10));
    CHECK(m.base_score == doctest::Approx(want.base).epsilon(1e-12));
  }
}

TEST_CASE("boosting fits XOR where the linear model cannot") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  testing::XorFixture(&x, &y);
  const auto rows = testing::AllRows(y.size());
  const BoostModel gbt = FitGbt(x, y, rows, GbtParams{});
  CHECK(evalgap::Mcc(y, evalgap::Classify(PredictProba(gbt, x))) == 1.0);
  const auto lin = model_linear::FitLinear(x, y, rows);
  CHECK(lin.weights.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(evalgap::Mcc(y, evalgap::Classify(model_linear::PredictProba(lin, x)))) <= 0.1);
}

TEST_CASE("training loss never increases across accepted trees") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  RandomDataset(99, &x, &y);
  GbtParams p;
  p.learning_rate = 1.0;
  p.min_samples_leaf = 1;
  p.max_iterations = 60;
  const BoostModel m = FitGbt(x, y, testing::AllRows(y.size()), p);
  for (size_t i = 1; i < m.train_loss.size(); ++i) CHECK(m.train_loss[i] <= m.train_loss[i - 1]);
  for (const auto& t : m.trees) {
    CHECK(t.NumLeaves() <= p.max_leaf_nodes);
    CHECK(t.Depth() <= p.max_depth);
  }
}

TEST_CASE("single-class training data yields the prior only") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(30, 2);
  const std::vector<int> y(30, 1);
  const BoostModel m = FitGbt(x, y, testing::AllRows(30), GbtParams{});
  CHECK(m.prior_only);
  CHECK(m.trees.empty());
  for (double p : PredictProba(m, x)) CHECK(p > 0.99);
}

TEST_CASE("hyperparameters are checked against the tuning ranges") {
  GbtParams p;
  p.learning_rate = 0.001;
  CHECK_THROWS_AS(p.ValidateRanges(), ConfigError);
  p = GbtParams{};
  p.max_depth = 21;
  CHECK_THROWS_AS(p.ValidateRanges(), ConfigError);
  p = GbtParams{};
  p.max_leaf_nodes = 1;
  CHECK_THROWS_AS(p.Validate(), ConfigError);
  CHECK(GbtParams::FromJson(GbtParams{}.ToJson()).ToJson() == GbtParams{}.ToJson());
}

TEST_CASE("boosting persistence and determinism") {
  testing::TempDir dir("gbt");
  Eigen::MatrixXd x;
  std::vector<int> y;
  RandomDataset(7, &x, &y);
  GbtParams p;
  p.min_samples_leaf = 2;
  p.max_iterations = 50;
  const auto rows = testing::AllRows(y.size());
  const BoostModel a = FitGbt(x, y, rows, p);
  const BoostModel b = FitGbt(x, y, rows, p);
  CHECK(a.ToJson().dump() == b.ToJson().dump());
  SaveBoostModel(a, dir / "m.json");
  const BoostModel back = LoadBoostModel(dir / "m.json");
  CHECK(PredictProba(back, x) == PredictProba(a, x));
  CHECK_THROWS_AS(PredictProba(a, Eigen::MatrixXd::Zero(3, x.cols() + 1)), InvalidArgument);
}
