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

#include "embedpca/pca.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace predgap::embedpca {

namespace {

constexpr double kRelativeFloor = 1e-12;

}  // namespace

Eigen::MatrixXd PcaResult::Standardize(const Eigen::MatrixXd& data) const {
  if (data.cols() != mean.size()) throw InvalidArgument("column count differs from the fitted PCA");
  Eigen::MatrixXd z = data.rowwise() - mean.transpose();
  return z.array().rowwise() / scale.transpose().array();
}

Eigen::MatrixXd PcaResult::Reconstruct() const {
  Eigen::MatrixXd out = scores * components.transpose();
  out.array().rowwise() *= scale.transpose().array();
  out.rowwise() += mean.transpose();
  return out;
}

Json PcaResult::SummaryJson() const {
  Json j;
  j["n_rows"] = scores.rows();
  j["input_columns"] = input_columns;
  j["dropped_columns"] = dropped_columns;
  j["scaled"] = scaled;
  Json ratios = Json::array();
  Json variances = Json::array();
  double cumulative = 0.0;
  Json cum = Json::array();
  for (Eigen::Index k = 0; k < explained_variance_ratio.size(); ++k) {
    ratios.push_back(explained_variance_ratio[k]);
    variances.push_back(explained_variance[k]);
    cumulative += explained_variance_ratio[k];
    cum.push_back(cumulative);
  }
  j["explained_variance"] = variances;
  j["explained_variance_ratio"] = ratios;
  j["cumulative_ratio"] = cum;
  j["notes"] = notes;
  return j;
}

PcaResult Pca(const Eigen::MatrixXd& data, const std::vector<std::string>& columns, const PcaOptions& options) {
  if (static_cast<size_t>(data.cols()) != columns.size()) throw InvalidArgument("column names do not match data");
  if (data.rows() < 2) throw InvalidArgument("PCA needs at least two rows");
  if (!data.allFinite()) throw InvalidArgument("PCA input has non-finite values");
  const double n = static_cast<double>(data.rows());

  PcaResult out;
  std::vector<Eigen::Index> keep;
  const Eigen::VectorXd col_mean = data.colwise().mean();
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double var = (data.col(c).array() - col_mean[c]).square().sum() / (n - 1.0);
    if (var > 0.0) {
      keep.push_back(c);
      out.input_columns.push_back(columns[static_cast<size_t>(c)]);
    } else {
      out.dropped_columns.push_back(columns[static_cast<size_t>(c)]);
      out.notes.push_back("dropped constant column '" + columns[static_cast<size_t>(c)] + "'");
    }
  }
  if (keep.empty()) throw InvalidArgument("every PCA input column is constant");
  const auto p = static_cast<Eigen::Index>(keep.size());

  Eigen::MatrixXd z(data.rows(), p);
  out.mean.resize(p);
  out.scale.setOnes(p);
  out.scaled = options.scale;
  for (Eigen::Index j = 0; j < p; ++j) {
    out.mean[j] = col_mean[keep[static_cast<size_t>(j)]];
    z.col(j) = data.col(keep[static_cast<size_t>(j)]).array() - out.mean[j];
    if (options.scale) {
      out.scale[j] = std::sqrt(z.col(j).squaredNorm() / (n - 1.0));
      z.col(j) /= out.scale[j];
    }
  }

  const Eigen::MatrixXd cov = (z.transpose() * z) / (n - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw InvariantError("covariance eigendecomposition failed");
  // Ascending eigenvalues; reverse.
  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double total = cov.trace();

  Eigen::Index k = 0;
  while (k < p && values[k] > kRelativeFloor * total) ++k;
  if (k < p) out.notes.push_back("truncated " + std::to_string(p - k) + " zero-variance components");
  if (options.n_components > 0) {
    if (options.n_components > std::min(data.rows(), p)) throw InvalidArgument("too many components requested");
    k = std::min<Eigen::Index>(k, options.n_components);
  }

  out.components = vectors.leftCols(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    out.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.components(arg, c) < 0.0) out.components.col(c) *= -1.0;
  }
  out.explained_variance = values.head(k);
  out.explained_variance_ratio = out.explained_variance / total;
  out.scores = z * out.components;
  return out;
}

double Pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidArgument("correlation inputs differ in length");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double den = std::sqrt(da.square().sum() * db.square().sum());
  if (!(den > 0.0)) throw InvalidArgument("zero-variance correlation input");
  return (da * db).sum() / den;
}

std::vector<Correlation> CorrelationTable::Summary(double min_abs) const {
  std::vector<Correlation> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [&](const Correlation& c) { return std::abs(c.r) >= min_abs; });
  return out;
}

void CorrelationTable::WriteCsv(const std::filesystem::path& path) const {
  CsvWriter w(path);
  w.WriteRow({"component", "variance_explained", "variable", "corr", "shown"});
  for (const auto& c : rows) {
    const auto it = std::find(components.begin(), components.end(), c.component);
    const double ratio = variance_ratios[static_cast<size_t>(it - components.begin())];
    w.WriteRow({c.component, FormatDouble(ratio), c.covariate, FormatDouble(c.r), std::abs(c.r) >= 0.3 ? "1" : "0"});
  }
  w.Close();
}

CorrelationTable ComponentCorrelations(const PcaResult& pca, int n_components,
                                       const std::vector<Covariate>& covariates) {
  if (n_components < 1 || n_components > pca.scores.cols()) throw InvalidArgument("invalid component count");
  CorrelationTable table;
  std::vector<uint8_t> usable(covariates.size(), 1);
  for (size_t v = 0; v < covariates.size(); ++v) {
    const auto& cov = covariates[v];
    if (cov.values.size() != pca.scores.rows()) throw InvalidArgument("covariate '" + cov.name + "' is misaligned");
    if (!((cov.values.array() - cov.values.mean()).abs().maxCoeff() > 0.0)) {
      usable[v] = 0;
      table.notes.push_back("skipped zero-variance covariate '" + cov.name + "'");
    }
  }
  for (int c = 0; c < n_components; ++c) {
    const std::string name = "PCA" + std::to_string(c + 1);
    table.components.push_back(name);
    table.variance_ratios.push_back(pca.explained_variance_ratio[c]);
    const Eigen::VectorXd score = pca.scores.col(c);
    std::vector<Correlation> block;
    for (size_t v = 0; v < covariates.size(); ++v) {
      if (usable[v]) block.push_back({name, covariates[v].name, Pearson(score, covariates[v].values)});
    }
    std::stable_sort(block.begin(), block.end(), [](const Correlation& a, const Correlation& b) {
      if (std::abs(a.r) != std::abs(b.r)) return std::abs(a.r) > std::abs(b.r);
      return a.covariate < b.covariate;
    });
    table.rows.insert(table.rows.end(), block.begin(), block.end());
  }
  return table;
}

void WriteScoresCsv(const std::vector<int64_t>& ids, const PcaResult& pca, const std::filesystem::path& path) {
  if (ids.size() != static_cast<size_t>(pca.scores.rows())) throw InvalidArgument("id count differs from scores");
  CsvWriter w(path);
  std::vector<std::string> header = {"child_id"};
  for (Eigen::Index c = 0; c < pca.scores.cols(); ++c) header.push_back("PCA" + std::to_string(c + 1));
  w.WriteRow(header);
  for (size_t i = 0; i < ids.size(); ++i) {
    std::vector<std::string> row = {std::to_string(ids[i])};
    for (Eigen::Index c = 0; c < pca.scores.cols(); ++c) {
      row.push_back(FormatDouble(pca.scores(static_cast<Eigen::Index>(i), c)));
    }
    w.WriteRow(row);
  }
  w.Close();
}

}  // namespace predgap::embedpca
