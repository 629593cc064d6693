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

#include "model_linear/linear_model.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/logistic.hpp"
#include "common/parallel.hpp"

namespace predgap::model_linear {

namespace {

// Training design matrix with a leading intercept column.
Eigen::MatrixXd Design(const Eigen::MatrixXd& x, std::span<const size_t> rows) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(rows.size()), x.cols() + 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    d(static_cast<Eigen::Index>(i), 0) = 1.0;
    d.row(static_cast<Eigen::Index>(i)).tail(x.cols()) = x.row(r);
  }
  return d;
}

double MeanLoss(const Eigen::MatrixXd& d, const Eigen::VectorXd& yv, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd z = d * theta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += LogLossFromLogit(z[i], yv[i] > 0.5);
  return s / static_cast<double>(z.size());
}

}  // namespace

double LossAndGradient(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> rows,
                       const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) {
  const Eigen::MatrixXd d = Design(x, rows);
  Eigen::VectorXd yv(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) yv[static_cast<Eigen::Index>(i)] = y[rows[i]];
  if (gradient) {
    Eigen::VectorXd p = d * theta;
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = Sigmoid(p[i]);
    *gradient = d.transpose() * (p - yv) / static_cast<double>(rows.size());
  }
  return MeanLoss(d, yv, theta);
}

LinearModel FitLinear(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> rows,
                      const FitOptions& options) {
  if (static_cast<size_t>(x.rows()) != y.size()) throw InvalidArgument("feature rows and outcomes differ in length");
  if (rows.empty()) throw InvalidArgument("no training rows");
  size_t positives = 0;
  for (size_t r : rows) {
    if (r >= y.size()) throw InvalidArgument("training row out of range");
    positives += y[r] != 0;
  }
  if (positives == 0 || positives == rows.size()) {
    throw InvalidArgument("training rows contain a single outcome class");
  }
  const Eigen::Index k = x.cols() + 1;
  const double n = static_cast<double>(rows.size());
  const Eigen::MatrixXd d = Design(x, rows);
  Eigen::VectorXd yv(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) yv[static_cast<Eigen::Index>(i)] = y[rows[i]];

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
  if (options.initial) {
    if (options.initial->size() != k) throw InvalidArgument("initial parameter vector has the wrong length");
    theta = *options.initial;
  }

  LinearModel m;
  double loss = MeanLoss(d, yv, theta);
  Eigen::VectorXd p(d.rows()), w(d.rows()), grad(k);
  int it = 0;
  for (;; ++it) {
    p = d * theta;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p[i] = Sigmoid(p[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    grad = d.transpose() * (p - yv) / n;
    m.gradient_norm = grad.cwiseAbs().maxCoeff();
    if (m.gradient_norm <= options.gradient_tolerance) {
      m.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    const Eigen::MatrixXd hess = d.transpose() * w.asDiagonal() * d / n;
    Eigen::VectorXd step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    const double scale = std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
    const bool ldlt_ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                         ldlt.vectorD().minCoeff() > 1e-12 * scale;
    if (ldlt_ok) {
      step = ldlt.solve(grad);
    } else {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(hess);
      cod.setThreshold(1e-10);
      step = cod.solve(grad);
    }

    bool accepted = false;
    if (step.allFinite()) {
      double t = 1.0;
      for (int h = 0; h < 40; ++h, t *= 0.5) {
        const Eigen::VectorXd cand = theta - t * step;
        const double cand_loss = MeanLoss(d, yv, cand);
        if (cand_loss <= loss) {
          accepted = cand_loss < loss || t == 1.0;
          theta = cand;
          loss = cand_loss;
          break;
        }
      }
    }
    if (!accepted) {
      ++m.fallback_steps;
      double t = 1.0;
      bool moved = false;
      for (int h = 0; h < 60; ++h, t *= 0.5) {
        const Eigen::VectorXd cand = theta - t * grad;
        const double cand_loss = MeanLoss(d, yv, cand);
        if (cand_loss < loss) {
          theta = cand;
          loss = cand_loss;
          moved = true;
          break;
        }
      }
      if (!moved) break;  // numerically stationary
    }
  }

  m.iterations = it;
  m.final_loss = loss;
  m.intercept = theta[0];
  m.weights = theta.tail(k - 1);
  if (!theta.allFinite()) throw InvariantError("logistic regression produced non-finite parameters");

  // Strict separation: every training row on the correct side of 0.5.
  const Eigen::VectorXd z = d * theta;
  bool all_correct = true;
  for (Eigen::Index i = 0; i < z.size() && all_correct; ++i) {
    all_correct = yv[i] > 0.5 ? z[i] > 0 : z[i] < 0;
  }
  m.separation_warning = all_correct || theta.cwiseAbs().maxCoeff() > 1e4;
  return m;
}

LinearModel FitLinear(const features::FeatureTable& table, std::span<const int> y, std::span<const size_t> rows,
                      const FitOptions& options) {
  LinearModel m = FitLinear(table.Matrix(), y, rows, options);
  m.feature_names = table.ColumnNames();
  m.schema_hash = table.SchemaHash();
  return m;
}

std::vector<double> PredictProba(const LinearModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.weights.size()) throw InvalidArgument("feature count differs from the model's");
  std::vector<double> out(static_cast<size_t>(x.rows()));
  ParallelFor(out.size(), [&](size_t i) {
    out[i] = Sigmoid(model.intercept + x.row(static_cast<Eigen::Index>(i)).dot(model.weights));
  }, 4096);
  return out;
}

std::vector<double> PredictProba(const LinearModel& model, const features::FeatureTable& table) {
  if (table.SchemaHash() != model.schema_hash) {
    throw DependencyError("feature schema " + HexU64(table.SchemaHash()) + " does not match the linear model's " +
                          HexU64(model.schema_hash));
  }
  return PredictProba(model, table.Matrix());
}

Json LinearModel::ToJson() const {
  Json j;
  j["family"] = "linear";
  j["schema_hash"] = HexU64(schema_hash);
  j["feature_names"] = feature_names;
  j["intercept"] = intercept;
  j["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
  j["training"] = {{"iterations", iterations},     {"final_loss", final_loss},
                   {"gradient_norm", gradient_norm}, {"converged", converged},
                   {"separation_warning", separation_warning}, {"fallback_steps", fallback_steps}};
  return j;
}

LinearModel LinearModel::FromJson(const Json& j) {
  if (j.value("family", "") != "linear") throw DependencyError("not a linear model file");
  LinearModel m;
  m.schema_hash = std::stoull(j.at("schema_hash").get<std::string>(), nullptr, 16);
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.intercept = j.at("intercept").get<double>();
  const auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  const auto& t = j.at("training");
  m.iterations = t.at("iterations").get<int>();
  m.final_loss = t.at("final_loss").get<double>();
  m.gradient_norm = t.at("gradient_norm").get<double>();
  m.converged = t.at("converged").get<bool>();
  m.separation_warning = t.at("separation_warning").get<bool>();
  m.fallback_steps = t.at("fallback_steps").get<int>();
  return m;
}

void SaveLinearModel(const LinearModel& model, const std::filesystem::path& path) {
  WriteJsonFile(path, model.ToJson());
}

LinearModel LoadLinearModel(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("missing artifact " + path.string() + " (run `train` first)");
  return LinearModel::FromJson(ReadJsonFile(path));
}

}  // namespace predgap::model_linear
