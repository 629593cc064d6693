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

#include "model_gbt/boost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common/error.hpp"
#include "common/logistic.hpp"
#include "common/parallel.hpp"

namespace predgap::model_gbt {

void GbtParams::Validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("gbt.learning_rate must be in (0, 1]");
  if (max_iterations < 0) throw ConfigError("gbt.max_iterations must be >= 0");
  if (max_leaf_nodes < 2) throw ConfigError("gbt.max_leaf_nodes must be >= 2");
  if (min_samples_leaf < 1) throw ConfigError("gbt.min_samples_leaf must be >= 1");
  if (max_depth < 1) throw ConfigError("gbt.max_depth must be >= 1");
}

void GbtParams::ValidateRanges() const {
  Validate();
  if (learning_rate < 0.01) throw ConfigError("gbt.learning_rate must be in [0.01, 1]");
  if (max_iterations < 50 || max_iterations > 200) throw ConfigError("gbt.max_iterations must be in [50, 200]");
  if (max_leaf_nodes > 50) throw ConfigError("gbt.max_leaf_nodes must be in [2, 50]");
  if (min_samples_leaf > 100) throw ConfigError("gbt.min_samples_leaf must be in [1, 100]");
  if (max_depth > 20) throw ConfigError("gbt.max_depth must be in [1, 20]");
}

Json GbtParams::ToJson() const {
  return Json{{"learning_rate", learning_rate},
              {"max_iterations", max_iterations},
              {"max_leaf_nodes", max_leaf_nodes},
              {"min_samples_leaf", min_samples_leaf},
              {"max_depth", max_depth}};
}

GbtParams GbtParams::FromJson(const Json& j) {
  GbtParams p;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") p.learning_rate = value.get<double>();
    else if (key == "max_iterations") p.max_iterations = value.get<int>();
    else if (key == "max_leaf_nodes") p.max_leaf_nodes = value.get<int>();
    else if (key == "min_samples_leaf") p.min_samples_leaf = value.get<int>();
    else if (key == "max_depth") p.max_depth = value.get<int>();
    else throw ConfigError("unknown gbt parameter '" + key + "'");
  }
  return p;
}

int Tree::NumLeaves() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int Tree::Depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

BinMapper BinMapper::Fit(const Eigen::MatrixXd& x, std::span<const size_t> rows, int max_bins) {
  if (max_bins < 2 || max_bins > kMaxBins) throw InvalidArgument("max_bins must be in [2, 255]");
  BinMapper m;
  m.cuts.resize(static_cast<size_t>(x.cols()));
  std::vector<double> v(rows.size());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    for (size_t i = 0; i < rows.size(); ++i) v[i] = x(static_cast<Eigen::Index>(rows[i]), f);
    std::sort(v.begin(), v.end());
    std::vector<double> distinct;
    std::vector<size_t> cum;  // rows up to and including each distinct value
    for (size_t i = 0; i < v.size(); ++i) {
      if (distinct.empty() || v[i] != distinct.back()) {
        distinct.push_back(v[i]);
        cum.push_back(0);
      }
      cum.back() = i + 1;
    }
    auto& cuts = m.cuts[static_cast<size_t>(f)];
    auto midpoint = [&](size_t j) { return distinct[j] + (distinct[j + 1] - distinct[j]) / 2.0; };
    if (distinct.size() <= static_cast<size_t>(max_bins)) {
      for (size_t j = 0; j + 1 < distinct.size(); ++j) cuts.push_back(midpoint(j));
    } else {
      // Cut after the distinct value where the cumulative count first
      // reaches each k/max_bins quantile; depends on ranks only.
      const double n = static_cast<double>(v.size());
      int k = 1;
      for (size_t j = 0; j + 1 < distinct.size() && k < max_bins; ++j) {
        if (static_cast<double>(cum[j]) >= k * n / max_bins) {
          cuts.push_back(midpoint(j));
          while (k < max_bins && static_cast<double>(cum[j]) >= k * n / max_bins) ++k;
        }
      }
    }
  }
  return m;
}

uint8_t BinMapper::Bin(size_t feature, double value) const {
  const auto& c = cuts[feature];
  return static_cast<uint8_t>(std::lower_bound(c.begin(), c.end(), value) - c.begin());
}

double BoostModel::Logit(std::span<const double> row) const {
  double sum = 0.0;
  for (const auto& t : trees) {
    int32_t k = 0;
    while (!t.nodes[k].is_leaf()) {
      const auto& n = t.nodes[k];
      k = row[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    sum += t.nodes[k].value;
  }
  return base_score + params.learning_rate * sum;
}

namespace {

struct Histogram {
  std::vector<double> g, h;
  std::vector<int32_t> c;
  void Resize(size_t n) {
    g.assign(n, 0.0);
    h.assign(n, 0.0);
    c.assign(n, 0);
  }
};

struct Candidate {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  int bin = -1;
  double gl = 0, hl = 0, gr = 0, hr = 0;
  int32_t nl = 0, nr = 0;
  bool valid() const { return feature >= 0 && gain > 0.0; }
};

struct OpenLeaf {
  int32_t node = 0;
  std::vector<uint32_t> rows;  // positions into the training subset
  Histogram hist;
  double g = 0, h = 0;
  Candidate best;
};

class TreeGrower {
 public:
  TreeGrower(const std::vector<uint8_t>& binned, size_t n, const BinMapper& bins, const GbtParams& params,
             const std::vector<double>& grad, const std::vector<double>& hess)
      : binned_(binned), n_(n), bins_(bins), params_(params), grad_(grad), hess_(hess) {
    offsets_.push_back(0);
    for (size_t f = 0; f < bins.cuts.size(); ++f) offsets_.push_back(offsets_.back() + bins.NumBins(f));
  }

  // Returns the tree plus, per leaf node, the rows that reached it.
  Tree Grow(std::vector<std::pair<int32_t, std::vector<uint32_t>>>* leaf_rows) {
    Tree tree;
    OpenLeaf root;
    root.rows.resize(n_);
    std::iota(root.rows.begin(), root.rows.end(), 0u);
    BuildHistogram(root.rows, root.hist);
    for (uint32_t r : root.rows) {
      root.g += grad_[r];
      root.h += hess_[r];
    }
    tree.nodes.push_back(MakeLeaf(root.g, root.h, static_cast<int32_t>(n_), 0));
    root.node = 0;
    root.best = FindBest(root);
    std::vector<OpenLeaf> open;
    open.push_back(std::move(root));
    std::vector<OpenLeaf> closed;
    int leaves = 1;

    while (leaves < params_.max_leaf_nodes) {
      int pick = -1;
      for (size_t i = 0; i < open.size(); ++i) {
        if (!open[i].best.valid()) continue;
        if (pick < 0 || open[i].best.gain > open[pick].best.gain) pick = static_cast<int>(i);
      }
      if (pick < 0) break;
      OpenLeaf parent = std::move(open[pick]);
      open.erase(open.begin() + pick);
      const Candidate& c = parent.best;

      OpenLeaf left, right;
      left.rows.reserve(static_cast<size_t>(c.nl));
      right.rows.reserve(static_cast<size_t>(c.nr));
      const uint8_t* col = binned_.data() + static_cast<size_t>(c.feature) * n_;
      for (uint32_t r : parent.rows) (col[r] <= c.bin ? left.rows : right.rows).push_back(r);
      left.g = c.gl, left.h = c.hl, right.g = c.gr, right.h = c.hr;

      OpenLeaf& small = left.rows.size() <= right.rows.size() ? left : right;
      OpenLeaf& large = left.rows.size() <= right.rows.size() ? right : left;
      BuildHistogram(small.rows, small.hist);
      large.hist = std::move(parent.hist);
      for (size_t k = 0; k < large.hist.g.size(); ++k) {
        large.hist.g[k] -= small.hist.g[k];
        large.hist.h[k] -= small.hist.h[k];
        large.hist.c[k] -= small.hist.c[k];
      }

      const int32_t depth = tree.nodes[parent.node].depth + 1;
      left.node = static_cast<int32_t>(tree.nodes.size());
      tree.nodes.push_back(MakeLeaf(left.g, left.h, c.nl, depth));
      right.node = static_cast<int32_t>(tree.nodes.size());
      tree.nodes.push_back(MakeLeaf(right.g, right.h, c.nr, depth));
      TreeNode& pn = tree.nodes[parent.node];
      pn.feature = c.feature;
      pn.bin = c.bin;
      pn.threshold = bins_.cuts[static_cast<size_t>(c.feature)][static_cast<size_t>(c.bin)];
      pn.left = left.node;
      pn.right = right.node;
      pn.value = 0.0;
      ++leaves;

      for (OpenLeaf* child : {&left, &right}) {
        if (depth < params_.max_depth) child->best = FindBest(*child);
        open.push_back(std::move(*child));
      }
    }
    for (auto& leaf : open) leaf_rows->emplace_back(leaf.node, std::move(leaf.rows));
    std::sort(leaf_rows->begin(), leaf_rows->end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return tree;
  }

 private:
  static TreeNode MakeLeaf(double g, double h, int32_t n, int32_t depth) {
    TreeNode t;
    t.value = -g / (h + kHessianDamping);
    t.n_samples = n;
    t.depth = depth;
    return t;
  }

  void BuildHistogram(const std::vector<uint32_t>& rows, Histogram& hist) const {
    hist.Resize(offsets_.back());
    ParallelFor(bins_.cuts.size(), [&](size_t f) {
      const uint8_t* col = binned_.data() + f * n_;
      double* g = hist.g.data() + offsets_[f];
      double* h = hist.h.data() + offsets_[f];
      int32_t* c = hist.c.data() + offsets_[f];
      for (uint32_t r : rows) {
        const uint8_t b = col[r];
        g[b] += grad_[r];
        h[b] += hess_[r];
        ++c[b];
      }
    }, 1);
  }

  Candidate FindBest(const OpenLeaf& leaf) const {
    const size_t nf = bins_.cuts.size();
    std::vector<Candidate> per_feature(nf);
    const int32_t n = static_cast<int32_t>(leaf.rows.size());
    const double parent_score = leaf.g * leaf.g / (leaf.h + kHessianDamping);
    ParallelFor(nf, [&](size_t f) {
      Candidate best;
      double gl = 0, hl = 0;
      int32_t nl = 0;
      const int nb = bins_.NumBins(f);
      for (int b = 0; b + 1 < nb; ++b) {
        gl += leaf.hist.g[offsets_[f] + b];
        hl += leaf.hist.h[offsets_[f] + b];
        nl += leaf.hist.c[offsets_[f] + b];
        const int32_t nr = n - nl;
        if (nl < params_.min_samples_leaf) continue;
        if (nr < params_.min_samples_leaf) break;
        const double gr = leaf.g - gl;
        const double hr = leaf.h - hl;
        const double gain = gl * gl / (hl + kHessianDamping) + gr * gr / (hr + kHessianDamping) - parent_score;
        if (gain > best.gain) best = Candidate{gain, static_cast<int>(f), b, gl, hl, gr, hr, nl, nr};
      }
      per_feature[f] = best;
    }, 1);
    Candidate best;
    for (const auto& c : per_feature) {
      if (c.feature >= 0 && c.gain > best.gain) best = c;
    }
    return best;
  }

  const std::vector<uint8_t>& binned_;
  size_t n_;
  const BinMapper& bins_;
  const GbtParams& params_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  std::vector<size_t> offsets_;
};

double MeanLoss(const std::vector<double>& logits, const std::vector<int>& y) {
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) s += LogLossFromLogit(logits[i], y[i]);
  return s / static_cast<double>(y.size());
}

}  // namespace

BoostModel FitGbt(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const size_t> rows,
                  const GbtParams& params, const FitOptions& options) {
  if (options.enforce_ranges) params.ValidateRanges();
  else params.Validate();
  if (static_cast<size_t>(x.rows()) != y.size()) throw InvalidArgument("feature rows and outcomes differ in length");
  if (rows.empty()) throw InvalidArgument("no training rows");
  for (size_t r : rows) {
    if (r >= y.size()) throw InvalidArgument("training row out of range");
  }

  BoostModel model;
  model.params = params;
  model.bins = BinMapper::Fit(x, rows);
  const size_t n = rows.size();
  std::vector<int> yt(n);
  double positives = 0;
  for (size_t i = 0; i < n; ++i) {
    yt[i] = y[rows[i]] != 0;
    positives += yt[i];
  }
  const double prior = std::clamp(positives / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  model.base_score = Logit(prior);
  std::vector<double> logits(n, model.base_score);
  double loss = MeanLoss(logits, yt);
  model.train_loss.push_back(loss);
  if (positives == 0 || positives == static_cast<double>(n)) {
    model.prior_only = true;
    return model;
  }

  const size_t nf = static_cast<size_t>(x.cols());
  std::vector<uint8_t> binned(nf * n);
  ParallelFor(nf, [&](size_t f) {
    for (size_t i = 0; i < n; ++i) {
      binned[f * n + i] = model.bins.Bin(f, x(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(f)));
    }
  }, 1);

  std::vector<double> grad(n), hess(n), trial(n);
  for (int m = 0; m < params.max_iterations; ++m) {
    for (size_t i = 0; i < n; ++i) {
      const double p = Sigmoid(logits[i]);
      grad[i] = p - yt[i];
      hess[i] = p * (1.0 - p);
    }
    TreeGrower grower(binned, n, model.bins, params, grad, hess);
    std::vector<std::pair<int32_t, std::vector<uint32_t>>> leaf_rows;
    Tree tree = grower.Grow(&leaf_rows);
    if (tree.nodes.size() == 1) break;  // no split improves the objective

    // Halve the step until the training loss does not increase.
    double scale = 1.0;
    double new_loss = loss;
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      trial = logits;
      for (const auto& [node, leaf] : leaf_rows) {
        const double step = params.learning_rate * scale * tree.nodes[node].value;
        for (uint32_t r : leaf) trial[r] += step;
      }
      new_loss = MeanLoss(trial, yt);
      if (new_loss <= loss) {
        accepted = true;
        break;
      }
      scale *= 0.5;
      ++model.shrink_steps;
    }
    if (!accepted) break;
    if (scale != 1.0) {
      for (auto& node : tree.nodes) {
        if (node.is_leaf()) node.value *= scale;
      }
    }
    logits.swap(trial);
    loss = new_loss;
    model.train_loss.push_back(loss);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

BoostModel FitGbt(const features::FeatureTable& table, std::span<const int> y, std::span<const size_t> rows,
                  const GbtParams& params, const FitOptions& options) {
  BoostModel m = FitGbt(table.Matrix(), y, rows, params, options);
  m.feature_names = table.ColumnNames();
  m.schema_hash = table.SchemaHash();
  return m;
}

std::vector<double> PredictProba(const BoostModel& model, const Eigen::MatrixXd& x) {
  if (static_cast<size_t>(x.cols()) != model.bins.cuts.size()) {
    throw InvalidArgument("feature count differs from the model's");
  }
  std::vector<double> out(static_cast<size_t>(x.rows()));
  ParallelFor(out.size(), [&](size_t i) {
    std::vector<double> row(static_cast<size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<size_t>(j)] = x(static_cast<Eigen::Index>(i), j);
    out[i] = Sigmoid(model.Logit(row));
  }, 1024);
  return out;
}

std::vector<double> PredictProba(const BoostModel& model, const features::FeatureTable& table) {
  if (table.SchemaHash() != model.schema_hash) {
    throw DependencyError("feature schema " + HexU64(table.SchemaHash()) + " does not match the boosting model's " +
                          HexU64(model.schema_hash));
  }
  return PredictProba(model, table.Matrix());
}

Json BoostModel::ToJson() const {
  Json j;
  j["family"] = "gbt";
  j["schema_hash"] = HexU64(schema_hash);
  j["feature_names"] = feature_names;
  j["params"] = params.ToJson();
  j["base_score"] = base_score;
  j["bin_cuts"] = bins.cuts;
  Json jt = Json::array();
  for (const auto& t : trees) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"value", n.value}, {"n", n.n_samples}, {"depth", n.depth}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"bin", n.bin}, {"threshold", n.threshold},
                         {"left", n.left}, {"right", n.right}, {"n", n.n_samples}, {"depth", n.depth}});
      }
    }
    jt.push_back(std::move(nodes));
  }
  j["trees"] = std::move(jt);
  j["training"] = {{"train_loss", train_loss}, {"shrink_steps", shrink_steps}, {"prior_only", prior_only},
                   {"early_stopping", false}};
  return j;
}

BoostModel BoostModel::FromJson(const Json& j) {
  if (j.value("family", "") != "gbt") throw DependencyError("not a boosting model file");
  BoostModel m;
  m.schema_hash = std::stoull(j.at("schema_hash").get<std::string>(), nullptr, 16);
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.params = GbtParams::FromJson(j.at("params"));
  m.base_score = j.at("base_score").get<double>();
  m.bins.cuts = j.at("bin_cuts").get<std::vector<std::vector<double>>>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    for (const auto& jn : jt) {
      TreeNode n;
      n.n_samples = jn.at("n").get<int32_t>();
      n.depth = jn.at("depth").get<int32_t>();
      if (jn.contains("value")) {
        n.value = jn.at("value").get<double>();
      } else {
        n.feature = jn.at("feature").get<int32_t>();
        n.bin = jn.at("bin").get<int32_t>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int32_t>();
        n.right = jn.at("right").get<int32_t>();
        const auto size = static_cast<int32_t>(jt.size());
        if (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size ||
            n.feature >= static_cast<int32_t>(m.bins.cuts.size())) {
          throw DependencyError("corrupt tree in boosting model file");
        }
      }
      t.nodes.push_back(n);
    }
    m.trees.push_back(std::move(t));
  }
  const auto& tr = j.at("training");
  m.train_loss = tr.at("train_loss").get<std::vector<double>>();
  m.shrink_steps = tr.at("shrink_steps").get<int>();
  m.prior_only = tr.at("prior_only").get<bool>();
  return m;
}

void SaveBoostModel(const BoostModel& model, const std::filesystem::path& path) {
  WriteJsonFile(path, model.ToJson());
}

BoostModel LoadBoostModel(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("missing artifact " + path.string() + " (run `train` first)");
  return BoostModel::FromJson(ReadJsonFile(path));
}

}  // namespace predgap::model_gbt
