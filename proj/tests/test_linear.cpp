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
#include "model_linear/linear_model.hpp"

using namespace predgap;
using namespace predgap::model_linear;

namespace {

// Unpenalized logistic regression on tests/data/logit.csv, from
// tests/oracles/make_fixtures.py (statsmodels Logit, tol 1e-12).
constexpr double kOracleParams[] = {-0.4079596254402456, 1.0349448663718945, -0.3859265692973165,
                                    0.824270180912888};
constexpr double kOracleLogLik = -228.17862810042143;

struct Fixture {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Fixture LoadLogit() {
  const Eigen::MatrixXd m = testing::LoadMatrix("logit.csv");
  Fixture f{m.leftCols(3), {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i) f.y.push_back(static_cast<int>(m(i, 3)));
  return f;
}

}  // namespace

TEST_CASE("newton solution matches the statsmodels oracle") {
  const Fixture f = LoadLogit();
  const auto rows = testing::AllRows(f.y.size());
  const LinearModel m = FitLinear(f.x, f.y, rows);
  CHECK(m.converged);
  CHECK_FALSE(m.separation_warning);
  CHECK(m.gradient_norm <= 1e-6);
  CHECK(m.intercept == doctest::Approx(kOracleParams[0]).epsilon(1e-6));
  for (int j = 0; j < 3; ++j) CHECK(m.weights[j] == doctest::Approx(kOracleParams[j + 1]).epsilon(1e-6));
  CHECK(-m.final_loss * static_cast<double>(rows.size()) == doctest::Approx(kOracleLogLik).epsilon(1e-9));
}

TEST_CASE("loss and gradient agree with finite differences") {
  const Fixture f = LoadLogit();
  const auto rows = testing::AllRows(f.y.size());
  Eigen::VectorXd theta(4);
  theta << 0.2, -0.1, 0.3, 0.05;
  Eigen::VectorXd grad;
  LossAndGradient(f.x, f.y, rows, theta, &grad);
  for (int j = 0; j < 4; ++j) {
    Eigen::VectorXd up = theta, down = theta;
    up[j] += 1e-6;
    down[j] -= 1e-6;
    const double fd = (LossAndGradient(f.x, f.y, rows, up, nullptr) -
                       LossAndGradient(f.x, f.y, rows, down, nullptr)) / 2e-6;
    CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("row subsets fit only those rows") {
  const Fixture f = LoadLogit();
  std::vector<size_t> half;
  for (size_t i = 0; i < f.y.size(); i += 2) half.push_back(i);
  Eigen::MatrixXd xs(half.size(), 3);
  std::vector<int> ys;
  for (size_t k = 0; k < half.size(); ++k) {
    xs.row(static_cast<Eigen::Index>(k)) = f.x.row(static_cast<Eigen::Index>(half[k]));
    ys.push_back(f.y[half[k]]);
  }
  const LinearModel a = FitLinear(f.x, f.y, half);
  const LinearModel b = FitLinear(xs, ys, testing::AllRows(ys.size()));
  CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-10));
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("separable data is flagged rather than looping") {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  const std::vector<int> y = {0, 0, 0, 1, 1, 1};
  const LinearModel m = FitLinear(x, y, testing::AllRows(6));
  CHECK(m.separation_warning);
  CHECK(m.iterations <= 100);
  for (double p : PredictProba(m, x)) CHECK(std::isfinite(p));
}

TEST_CASE("collinear columns still reach a stationary point") {
  const Fixture f = LoadLogit();
  Eigen::MatrixXd x(f.x.rows(), 4);
  x << f.x, f.x.col(0) * 2.0;
  const LinearModel m = FitLinear(x, f.y, testing::AllRows(f.y.size()));
  CHECK(m.gradient_norm <= 1e-6);
  CHECK(-m.final_loss * static_cast<double>(f.y.size()) == doctest::Approx(kOracleLogLik).epsilon(1e-8));
}

TEST_CASE("linear model persistence") {
  testing::TempDir dir("lin");
  const Fixture f = LoadLogit();
  const LinearModel m = FitLinear(f.x, f.y, testing::AllRows(f.y.size()));
  SaveLinearModel(m, dir / "m.json");
  const LinearModel back = LoadLinearModel(dir / "m.json");
  CHECK(PredictProba(back, f.x) == PredictProba(m, f.x));
  CHECK_THROWS(LoadLinearModel(dir / "absent.json"));
  const std::vector<int> short_y = {1, 0};
  CHECK_THROWS_AS(FitLinear(f.x, short_y, testing::AllRows(2)), InvalidArgument);
}
