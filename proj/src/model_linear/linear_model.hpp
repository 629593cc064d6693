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

#ifndef PREDGAP_MODEL_LINEAR_LINEAR_MODEL_HPP_
#define PREDGAP_MODEL_LINEAR_LINEAR_MODEL_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/io.hpp"
#include "features/feature_table.hpp"

namespace predgap::model_linear {

struct FitOptions {
  double gradient_tolerance = 1e-6;  // infinity norm of the mean-loss gradient
  int max_iterations = 100;
  // Starting point (intercept first); zeros when absent.
  std::optional<Eigen::VectorXd> initial;
};

// Unpenalized logistic regression. Weights align with the feature columns
// the model was fit on.
struct LinearModel {
  std::vector<std::string> feature_names;
  uint64_t schema_hash = 0;
  double intercept = 0.0;
  Eigen::VectorXd weights;

  int iterations = 0;
  double final_loss = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool separation_warning = false;
  int fallback_steps = 0;  // iterations that did not take a Newton step

  Json ToJson() const;
  static LinearModel FromJson(const Json& j);
};

// Mean log-loss over `rows` and its gradient (intercept first).
double LossAndGradient(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> rows,
                       const Eigen::VectorXd& theta, Eigen::VectorXd* gradient);

// Newton's method with step halving; a singular Hessian is solved in the
// least-squares sense, and a direction that fails to decrease the loss
// falls back to a gradient step. Throws InvalidArgument if the training
// rows hold a single class or shapes disagree.
LinearModel FitLinear(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> rows,
                      const FitOptions& options = {});
LinearModel FitLinear(const features::FeatureTable& table, std::span<const int> y, std::span<const size_t> rows,
                      const FitOptions& options = {});

std::vector<double> PredictProba(const LinearModel& model, const Eigen::MatrixXd& x);
// Throws DependencyError when the table schema differs from the model's.
std::vector<double> PredictProba(const LinearModel& model, const features::FeatureTable& table);

void SaveLinearModel(const LinearModel& model, const std::filesystem::path& path);
LinearModel LoadLinearModel(const std::filesystem::path& path);

}  // namespace predgap::model_linear

#endif  // PREDGAP_MODEL_LINEAR_LINEAR_MODEL_HPP_
