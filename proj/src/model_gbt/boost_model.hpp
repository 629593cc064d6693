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

#ifndef PREDGAP_MODEL_GBT_BOOST_MODEL_HPP_
#define PREDGAP_MODEL_GBT_BOOST_MODEL_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "common/io.hpp"
#include "features/feature_table.hpp"

namespace predgap::model_gbt {

inline constexpr int kMaxBins = 255;
inline constexpr double kHessianDamping = 1e-9;

struct GbtParams {
  double learning_rate = 0.1;
  int max_iterations = 100;
  int max_leaf_nodes = 31;
  int min_samples_leaf = 20;
  int max_depth = 8;

  // Structural checks (positive sizes, learning rate in (0, 1]).
  void Validate() const;
  // The tuning ranges: learning rate [0.01, 1], iterations [50, 200],
  // leaf nodes [2, 50], min samples per leaf [1, 100], depth [1, 20].
  void ValidateRanges() const;
  Json ToJson() const;
  static GbtParams FromJson(const Json& j);
};

struct TreeNode {
  int32_t feature = -1;  // -1 marks a leaf
  int32_t bin = -1;      // rows with bin <= this go left
  double threshold = 0.0;  // equivalent raw cut: x <= threshold goes left
  int32_t left = -1;
  int32_t right = -1;
  double value = 0.0;  // leaf logit increment before the learning rate
  int32_t n_samples = 0;
  int32_t depth = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int NumLeaves() const;
  int Depth() const;
};

// Quantile cut points per feature. Bin b holds values in
// (cuts[b-1], cuts[b]]; at most kMaxBins bins.
struct BinMapper {
  std::vector<std::vector<double>> cuts;

  static BinMapper Fit(const Eigen::MatrixXd& x, std::span<const size_t> rows, int max_bins = kMaxBins);
  uint8_t Bin(size_t feature, double value) const;
  int NumBins(size_t feature) const { return static_cast<int>(cuts[feature].size()) + 1; }
};

struct BoostModel {
  std::vector<std::string> feature_names;
  uint64_t schema_hash = 0;
  GbtParams params;
  BinMapper bins;
  double base_score = 0.0;  // prior log-odds of the training rows
  std::vector<Tree> trees;

  // Diagnostics.
  std::vector<double> train_loss;  // after each accepted tree; [0] is the prior
  int shrink_steps = 0;            // halvings applied to keep the loss non-increasing
  bool prior_only = false;

  double Logit(std::span<const double> row) const;
  Json ToJson() const;
  static BoostModel FromJson(const Json& j);
};

struct FitOptions {
  // Reject hyperparameters outside the tuning ranges. Limit-case tests
  // (a single stump, vanishing learning rate) turn this off.
  bool enforce_ranges = true;
};

// Gradient boosting on the log-loss with Newton leaf values and leaf-wise
// growth over histogram splits. Ties between equal gains resolve to the
// lowest feature index, then the lowest bin. A single-class training set
// yields a prior-only model.
BoostModel FitGbt(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> rows,
                  const GbtParams& params, const FitOptions& options = {});
BoostModel FitGbt(const features::FeatureTable& table, std::span<const int> y, std::span<const size_t> rows,
                  const GbtParams& params, const FitOptions& options = {});

std::vector<double> PredictProba(const BoostModel& model, const Eigen::MatrixXd& x);
// Throws DependencyError when the table schema differs from the model's.
std::vector<double> PredictProba(const BoostModel& model, const features::FeatureTable& table);

void SaveBoostModel(const BoostModel& model, const std::filesystem::path& path);
BoostModel LoadBoostModel(const std::filesystem::path& path);

}  // namespace predgap::model_gbt

#endif  // PREDGAP_MODEL_GBT_BOOST_MODEL_HPP_
