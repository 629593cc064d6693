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
#include "embedpca/pca.hpp"
#include "fixtures.hpp"

using namespace predgap;
using namespace predgap::embedpca;

namespace {

// Standardized PCA of tests/data/pca.csv, from tests/oracles/make_fixtures.py
// (sklearn).
constexpr double kOracleRatio[] = {0.48825097771115633, 0.2586887978935167, 0.24696549480540414,
                                   0.006094729589922704};

const std::vector<std::string> kCols = {"a", "b", "c", "d"};

}  // namespace

TEST_CASE("explained variance matches the sklearn oracle") {
  const Eigen::MatrixXd x = testing::LoadMatrix("pca.csv");
  const PcaResult r = Pca(x, kCols);
  REQUIRE(r.explained_variance_ratio.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(r.explained_variance_ratio[k] == doctest::Approx(kOracleRatio[k]).epsilon(1e-10));
}

TEST_CASE("components are orthonormal, ratios non-increasing, reconstruction exact") {
  const Eigen::MatrixXd x = testing::LoadMatrix("pca.csv");
  const PcaResult r = Pca(x, kCols);
  const Eigen::MatrixXd gram = r.components.transpose() * r.components;
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <= 1e-10);
  for (Eigen::Index k = 1; k < r.explained_variance_ratio.size(); ++k) {
    CHECK(r.explained_variance_ratio[k] <= r.explained_variance_ratio[k - 1]);
  }
  CHECK(r.explained_variance_ratio.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((r.Reconstruct() - x).cwiseAbs().maxCoeff() <= 1e-8);
  for (Eigen::Index k = 0; k < r.components.cols(); ++k) {
    Eigen::Index arg;
    r.components.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(r.components(arg, k) > 0);
  }
}

TEST_CASE("points on a line have a single component") {
  Eigen::MatrixXd x(50, 3);
  for (int i = 0; i < 50; ++i) {
    const double t = i * 0.37 - 4;
    x.row(i) << t, 2 * t + 1, -t;
  }
  const PcaResult r = Pca(x, {"u", "v", "w"}, {false, 0});
  REQUIRE(r.components.cols() == 1);
  CHECK(r.explained_variance_ratio[0] == doctest::Approx(1.0));
  Eigen::Vector3d dir(1, 2, -1);
  dir.normalize();
  CHECK(std::abs(std::abs(r.components.col(0).dot(dir)) - 1.0) < 1e-12);
  CHECK((r.Reconstruct() - x).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("isotropic data spreads variance evenly") {
  Rng rng(2);
  Eigen::MatrixXd x(20000, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal();
  const PcaResult r = Pca(x, {"a", "b", "c"});
  for (int k = 0; k < 3; ++k) CHECK(std::abs(r.explained_variance_ratio[k] - 1.0 / 3) < 0.02);
}

TEST_CASE("pca of pca scores is the identity rotation") {
  const Eigen::MatrixXd x = testing::LoadMatrix("pca.csv");
  const PcaResult first = Pca(x, kCols);
  const PcaResult second = Pca(first.scores, {"p1", "p2", "p3", "p4"}, {false, 0});
  CHECK((second.components.cwiseAbs() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((second.explained_variance - first.explained_variance).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant columns are dropped with a note") {
  Eigen::MatrixXd x = testing::LoadMatrix("pca.csv");
  x.col(3).setConstant(2.0);
  const PcaResult r = Pca(x, kCols);
  CHECK(r.dropped_columns == std::vector<std::string>{"d"});
  CHECK(r.input_columns.size() == 3);
  CHECK_FALSE(r.notes.empty());
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(10, 2);
  CHECK_THROWS(Pca(flat, {"a", "b"}));
}

TEST_CASE("correlation table layout") {
  const Eigen::MatrixXd x = testing::LoadMatrix("pca.csv");
  const PcaResult r = Pca(x, kCols, {true, 2});
  REQUIRE(r.scores.cols() == 2);
  std::vector<Covariate> covs;
  for (int j = 0; j < 4; ++j) covs.push_back({kCols[static_cast<size_t>(j)], x.col(j)});
  covs.push_back({"PCA1 nuclear", r.scores.col(0) * 2.0 + Eigen::VectorXd::Constant(x.rows(), 1.0)});
  covs.push_back({"PCA1 school", -r.scores.col(1)});
  covs.push_back({"flat", Eigen::VectorXd::Zero(x.rows())});
  const CorrelationTable t = ComponentCorrelations(r, 2, covs);
  CHECK(t.components == std::vector<std::string>{"PCA1", "PCA2"});
  CHECK(t.rows.size() == 12);  // 6 usable covariates per component
  CHECK(t.notes.size() == 1);

  // Sorted by |r| within a component, and the affine copy of PCA1 leads.
  CHECK(t.rows[0].component == "PCA1");
  CHECK(t.rows[0].covariate == "PCA1 nuclear");
  CHECK(t.rows[0].r == doctest::Approx(1.0));
  for (size_t i = 1; i < t.rows.size(); ++i) {
    if (t.rows[i].component == t.rows[i - 1].component) CHECK(std::abs(t.rows[i].r) <= std::abs(t.rows[i - 1].r));
    CHECK(std::abs(t.rows[i].r) <= 1.0 + 1e-12);
  }
  bool school_on_pca2 = false;
  for (const auto& row : t.rows) {
    if (row.component == "PCA2" && row.covariate == "PCA1 school") school_on_pca2 = row.r == doctest::Approx(-1.0);
  }
  CHECK(school_on_pca2);
  for (const auto& row : t.Summary(0.3)) CHECK(std::abs(row.r) >= 0.3);

  testing::TempDir dir("pca");
  t.WriteCsv(dir / "c.csv");
  const CsvTable csv = ReadCsv(dir / "c.csv");
  CHECK(csv.header == std::vector<std::string>{"component", "variance_explained", "variable", "corr", "shown"});
  CHECK(csv.rows.size() == 12);
  CHECK(Pearson(x.col(0), x.col(0)) == doctest::Approx(1.0));
}
