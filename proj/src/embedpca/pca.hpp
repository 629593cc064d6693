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

#ifndef PREDGAP_EMBEDPCA_PCA_HPP_
#define PREDGAP_EMBEDPCA_PCA_HPP_

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "common/io.hpp"

namespace predgap::embedpca {

struct PcaResult {
  std::vector<std::string> input_columns;  // kept columns
  std::vector<std::string> dropped_columns;  // zero variance
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // ones when unscaled
  bool scaled = true;
  Eigen::MatrixXd components;  // columns are unit loading vectors
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd explained_variance_ratio;
  Eigen::MatrixXd scores;  // rows x components
  std::vector<std::string> notes;

  Eigen::MatrixXd Standardize(const Eigen::MatrixXd& data) const;  // kept columns only
  // Kept columns in input units.
  Eigen::MatrixXd Reconstruct() const;
  Json SummaryJson() const;
};

struct PcaOptions {
  bool scale = true;
  // 0 keeps every component of non-zero variance.
  int n_components = 0;
};

// Eigendecomposition of the sample covariance of the centered (and scaled)
// columns. Each component's largest-magnitude loading is positive.
// Zero-variance columns are dropped with a note; components with variance
// below 1e-12 of the total are truncated.
PcaResult Pca(const Eigen::MatrixXd& data, const std::vector<std::string>& columns, const PcaOptions& options = {});

double Pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct Covariate {
  std::string name;
  Eigen::VectorXd values;
};

struct Correlation {
  std::string component;
  std::string covariate;
  double r = 0.0;
};

struct CorrelationTable {
  std::vector<std::string> components;
  std::vector<double> variance_ratios;  // per component
  // Grouped by component; within a component sorted by |r| descending,
  // ties by covariate name.
  std::vector<Correlation> rows;
  std::vector<std::string> notes;  // skipped covariates

  std::vector<Correlation> Summary(double min_abs = 0.3) const;
  // component, variance_explained, variable, corr, shown (|r| >= 0.3).
  void WriteCsv(const std::filesystem::path& path) const;
};

// Correlates the first `n_components` score columns (named PCA1..) with each
// covariate. Auxiliary components, such as the first component of a model
// restricted to fewer contexts, go in as covariates named "PCA1 nuclear".
CorrelationTable ComponentCorrelations(const PcaResult& pca, int n_components, const std::vector<Covariate>& covariates);

void WriteScoresCsv(const std::vector<int64_t>& ids, const PcaResult& pca, const std::filesystem::path& path);

}  // namespace predgap::embedpca

#endif  // PREDGAP_EMBEDPCA_PCA_HPP_
