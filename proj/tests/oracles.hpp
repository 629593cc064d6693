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

// Reference implementations the library is checked against. Each one is
// written the slow, obvious way and shares no code with src/.

#ifndef PREDGAP_TESTS_ORACLES_HPP_
#define PREDGAP_TESTS_ORACLES_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "model_gnn/gnn_model.hpp"

namespace predgap::oracle {

inline double Pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Fraction of (positive, negative) pairs ranked correctly, ties count half.
inline double PairCountAuc(const std::vector<int>& y, const std::vector<double>& p) {
  double good = 0, pairs = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!y[i]) continue;
    for (size_t j = 0; j < y.size(); ++j) {
      if (y[j]) continue;
      pairs += 1;
      good += p[i] > p[j] ? 1.0 : (p[i] == p[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

struct Stump {
  int feature = -1;
  double threshold = 0.0;
  double left = 0.0;   // logit increment, x <= threshold
  double right = 0.0;
  double base = 0.0;
};

// Best single split for one Newton boosting step from the class prior,
// enumerating every midpoint between distinct values of every feature.
// Ties keep the first candidate in (feature, threshold) order. The step is
// halved until the mean log-loss does not increase.
inline Stump BruteForceStump(const Eigen::MatrixXd& x, const std::vector<int>& y, int min_leaf = 1,
                             double damping = 1e-9) {
  const size_t n = y.size();
  double pos = 0;
  for (int v : y) pos += v;
  const double prior = pos / static_cast<double>(n);
  Stump best;
  best.base = std::log(prior / (1 - prior));
  const double h = prior * (1 - prior);
  double best_gain = -std::numeric_limits<double>::infinity();
  double g_total = 0;
  for (int v : y) g_total += prior - v;
  const double parent = g_total * g_total / (h * static_cast<double>(n) + damping);
  for (int f = 0; f < x.cols(); ++f) {
    std::vector<double> values(x.col(f).data(), x.col(f).data() + x.rows());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (size_t k = 0; k + 1 < values.size(); ++k) {
      const double t = values[k] + (values[k + 1] - values[k]) / 2.0;
      double gl = 0, hl = 0, gr = 0, hr = 0;
      int nl = 0, nr = 0;
      for (size_t i = 0; i < n; ++i) {
        if (x(static_cast<Eigen::Index>(i), f) <= t) {
          gl += prior - y[i];
          hl += h;
          ++nl;
        } else {
          gr += prior - y[i];
          hr += h;
          ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = gl * gl / (hl + damping) + gr * gr / (hr + damping) - parent;
      if (gain > best_gain) {
        best_gain = gain;
        best.feature = f;
        best.threshold = t;
        best.left = -gl / (hl + damping);
        best.right = -gr / (hr + damping);
      }
    }
  }
  if (best.feature < 0 || !(best_gain > 0)) {
    best.feature = -1;
    best.left = best.right = 0;
    return best;
  }
  auto mean_loss = [&](double scale) {
    double s = 0;
    for (size_t i = 0; i < n; ++i) {
      const double z = best.base + scale * (x(static_cast<Eigen::Index>(i), best.feature) <= best.threshold
                                                ? best.left
                                                : best.right);
      const double p = 1 / (1 + std::exp(-z));
      s -= y[i] ? std::log(p) : std::log(1 - p);
    }
    return s / static_cast<double>(n);
  };
  const double start = mean_loss(0.0);
  double scale = 1.0;
  while (mean_loss(scale) > start && scale > 1e-12) scale *= 0.5;
  best.left *= scale;
  best.right *= scale;
  return best;
}

struct GradCheck {
  double worst_relative = 0.0;
  std::string worst_block;
};

// Central differences over every scalar parameter of every block, same
// dropout stream on both sides.
inline GradCheck CheckGnnGradients(model_gnn::GnnModel model, const hetgraph::HeteroGraph& graph,
                                   const std::vector<uint8_t>& mask, double h = 1e-5) {
  using namespace model_gnn;
  constexpr uint64_t kStream = 5;
  ForwardCache cache;
  GnnForward(model, graph, Mode::kTrain, &cache, kStream);
  const auto grads = GnnBackward(model, graph, cache, graph.outcomes, mask);
  auto loss = [&] {
    ForwardCache c;
    GnnForward(model, graph, Mode::kTrain, &c, kStream);
    return MaskedLogLoss(c.logits, graph.outcomes, mask);
  };
  GradCheck out;
  for (size_t b = 0; b < model.params.size(); ++b) {
    double* data = model.params[b].value.data();
    for (Eigen::Index i = 0; i < model.params[b].value.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double up = loss();
      data[i] = orig - h;
      const double down = loss();
      data[i] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = grads[b].data()[i];
      // Relative error with a floor so exactly-zero gradients compare
      // absolutely.
      const double rel = std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an));
      if (rel > out.worst_relative) {
        out.worst_relative = rel;
        out.worst_block = model.params[b].name;
      }
    }
  }
  return out;
}

}  // namespace predgap::oracle

#endif  // PREDGAP_TESTS_ORACLES_HPP_
