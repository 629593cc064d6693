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

#include "model_gnn/gnn_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "common/error.hpp"
#include "common/logistic.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"

namespace predgap::model_gnn {

namespace {

constexpr double kNormEpsilon = 1e-12;
constexpr char kMagic[8] = {'P', 'G', 'G', 'N', 'N', '0', '0', '1'};

std::string_view TypeName(NodeType t) { return t == NodeType::kChild ? "child" : "person"; }
size_t TypeIndex(NodeType t) { return static_cast<size_t>(t); }

int MessageArity(Aggregator a) { return a == Aggregator::kConcat ? 2 : 1; }

}  // namespace

std::string_view AggregatorName(Aggregator a) {
  switch (a) {
    case Aggregator::kMean: return "mean";
    case Aggregator::kMax: return "max";
    case Aggregator::kConcat: return "concat";
  }
  return "mean";
}

Aggregator ParseAggregator(std::string_view s) {
  if (s == "mean") return Aggregator::kMean;
  if (s == "max") return Aggregator::kMax;
  if (s == "concat") return Aggregator::kConcat;
  throw ConfigError("unknown aggregator '" + std::string(s) + "' (mean, max, concat)");
}

std::string_view CrossTypeMergeName(CrossTypeMerge m) { return m == CrossTypeMerge::kMean ? "mean" : "cat"; }

CrossTypeMerge ParseCrossTypeMerge(std::string_view s) {
  if (s == "mean") return CrossTypeMerge::kMean;
  if (s == "cat" || s == "concat") return CrossTypeMerge::kConcat;
  throw ConfigError("unknown cross-type merge '" + std::string(s) + "' (mean, cat)");
}

void GnnConfig::Validate() const {
  if (hidden_dim < 1) throw ConfigError("gnn.hidden_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("gnn.dropout must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("gnn.learning_rate must be > 0");
  if (max_epochs < 1) throw ConfigError("gnn.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("gnn.patience must be >= 1");
}

void GnnConfig::ValidateRanges() const {
  Validate();
  if (hidden_dim < 16 || hidden_dim > 64) throw ConfigError("gnn.hidden_dim must be in [16, 64]");
  if (dropout < 0.1 || dropout > 0.3) throw ConfigError("gnn.dropout must be in [0.1, 0.3]");
  if (learning_rate < 0.01 || learning_rate > 0.1) throw ConfigError("gnn.learning_rate must be in [0.01, 0.1]");
}

Json GnnConfig::ToJson() const {
  Json aggs;
  for (Relation r : synthpop::kAllRelations) {
    aggs[std::string(synthpop::RelationName(r))] = AggregatorName(aggregators[static_cast<size_t>(r)]);
  }
  return Json{{"hidden_dim", hidden_dim},
              {"dropout", dropout},
              {"learning_rate", learning_rate},
              {"aggregators", aggs},
              {"cross_type", CrossTypeMergeName(cross_type)},
              {"layer_normalize", layer_normalize},
              {"max_epochs", max_epochs},
              {"patience", patience},
              {"rng_seed", rng_seed}};
}

GnnConfig GnnConfig::FromJson(const Json& j) {
  GnnConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "hidden_dim") c.hidden_dim = value.get<int>();
    else if (key == "dropout") c.dropout = value.get<double>();
    else if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "cross_type") c.cross_type = ParseCrossTypeMerge(value.get<std::string>());
    else if (key == "layer_normalize") c.layer_normalize = value.get<bool>();
    else if (key == "max_epochs") c.max_epochs = value.get<int>();
    else if (key == "patience") c.patience = value.get<int>();
    else if (key == "rng_seed") c.rng_seed = value.get<uint64_t>();
    else if (key == "aggregators") {
      for (const auto& [rel, agg] : value.items()) {
        c.aggregators[static_cast<size_t>(synthpop::ParseRelation(rel))] = ParseAggregator(agg.get<std::string>());
      }
    } else {
      throw ConfigError("unknown gnn parameter '" + key + "'");
    }
  }
  return c;
}

size_t GnnModel::NumParameters() const {
  size_t n = 0;
  for (const auto& p : params) n += static_cast<size_t>(p.value.size());
  return n;
}

namespace {

Layout BuildLayout(const GnnConfig& config, size_t child_features, size_t person_features,
                   const std::vector<Relation>& relations, std::vector<ParamBlock>* blocks) {
  const Eigen::Index h = config.hidden_dim;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    blocks->push_back({std::move(name), RowMatrix::Zero(rows, cols)});
    return static_cast<int>(blocks->size() - 1);
  };
  Layout layout;
  const bool has_persons = person_features > 0;
  layout.projection_w[0] = add("proj.child.w", static_cast<Eigen::Index>(child_features), h);
  layout.projection_b[0] = add("proj.child.b", 1, h);
  if (has_persons) {
    layout.projection_w[1] = add("proj.person.w", static_cast<Eigen::Index>(person_features), h);
    layout.projection_b[1] = add("proj.person.b", 1, h);
  }
  for (int k = 0; k < kNumLayers; ++k) {
    std::vector<NodeType> types = {NodeType::kChild};
    // Person states after the last layer never reach the head.
    if (has_persons && k + 1 < kNumLayers) types.push_back(NodeType::kPerson);
    const std::string prefix = "layer" + std::to_string(k + 1) + ".";
    for (NodeType t : types) {
      TypeSlots ts;
      ts.type = t;
      for (Relation r : relations) {
        if (synthpop::TargetType(r) != t) continue;
        const std::string rn(synthpop::RelationName(r));
        RelationSlots rs;
        rs.relation = r;
        rs.self = add(prefix + rn + ".self", h, h);
        rs.neighbor = add(prefix + rn + ".neighbor", MessageArity(config.aggregators[static_cast<size_t>(r)]) * h, h);
        ts.relations.push_back(rs);
      }
      const Eigen::Index nr = static_cast<Eigen::Index>(ts.relations.size());
      const Eigen::Index merged = nr == 0 ? 0 : (config.cross_type == CrossTypeMerge::kMean ? h : nr * h);
      ts.update = add(prefix + std::string(TypeName(t)) + ".update", h + merged, h);
      ts.bias = add(prefix + std::string(TypeName(t)) + ".bias", 1, h);
      layout.layers[k].push_back(std::move(ts));
    }
  }
  layout.head_w = add("head.w", h, 1);
  layout.head_b = add("head.b", 1, 1);
  return layout;
}

// Mean and/or max over in-neighbors of the active rows; isolated nodes get
// zeros.
RowMatrix Aggregate(const hetgraph::Csr& in, std::span<const int32_t> rows, const RowMatrix& src, Aggregator agg,
                    std::vector<int32_t>* argmax) {
  const Eigen::Index h = src.cols();
  const size_t n = rows.size();
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(n), MessageArity(agg) * h);
  const bool use_mean = agg != Aggregator::kMax;
  const bool use_max = agg != Aggregator::kMean;
  const Eigen::Index max_off = agg == Aggregator::kConcat ? h : 0;
  if (use_max) argmax->assign(n * static_cast<size_t>(h), -1);
  const double* base = src.data();
  ParallelFor(n, [&](size_t v) {
    const auto nbrs = in.Row(static_cast<size_t>(rows[v]));
    if (nbrs.empty()) return;
    double* o = out.data() + v * static_cast<size_t>(out.cols());
    if (use_mean) {
      for (int32_t u : nbrs) {
        const double* x = base + static_cast<size_t>(u) * static_cast<size_t>(h);
        for (Eigen::Index c = 0; c < h; ++c) o[c] += x[c];
      }
      const double inv = 1.0 / static_cast<double>(nbrs.size());
      for (Eigen::Index c = 0; c < h; ++c) o[c] *= inv;
    }
    if (use_max) {
      // Ties keep the first neighbor in ascending node order.
      double* m = o + max_off;
      int32_t* am = argmax->data() + v * static_cast<size_t>(h);
      const double* x0 = base + static_cast<size_t>(nbrs[0]) * static_cast<size_t>(h);
      for (Eigen::Index c = 0; c < h; ++c) {
        m[c] = x0[c];
        am[c] = nbrs[0];
      }
      for (size_t j = 1; j < nbrs.size(); ++j) {
        const double* x = base + static_cast<size_t>(nbrs[j]) * static_cast<size_t>(h);
        for (Eigen::Index c = 0; c < h; ++c) {
          if (x[c] > m[c]) {
            m[c] = x[c];
            am[c] = nbrs[j];
          }
        }
      }
    }
  }, 512);
  return out;
}

void CheckFinite(const RowMatrix& m, int layer, std::string_view what) {
  // A non-finite entry makes the sum non-finite; so does overflow, which is
  // just as fatal.
  if (!std::isfinite(m.sum())) {
    throw InvariantError("non-finite activation in layer " + std::to_string(layer) + " (" + std::string(what) + ")");
  }
}

const RowMatrix& LayerInput(const ForwardCache& cache, int k, NodeType t) {
  if (k == 0) return cache.h0[TypeIndex(t)];
  for (const auto& tc : cache.layers[k - 1]) {
    if (tc.type == t) return tc.output;
  }
  throw InvariantError("missing layer input for node type " + std::string(TypeName(t)));
}

void CheckGraph(const GnnModel& model, const HeteroGraph& graph) {
  if (graph.SchemaHash() != model.graph_schema_hash) {
    throw DependencyError("graph schema " + HexU64(graph.SchemaHash()) + " does not match the GNN model's " +
                          HexU64(model.graph_schema_hash));
  }
}

// Nodes each layer must compute, working back from the head.
std::array<std::array<std::vector<int32_t>, 2>, kNumLayers> ActiveRows(const Layout& layout,
                                                                       const HeteroGraph& graph,
                                                                       std::span<const uint8_t> outputs) {
  std::array<std::array<std::vector<int32_t>, 2>, kNumLayers> active;
  std::array<std::vector<uint8_t>, 2> need;
  if (outputs.empty()) {
    need[0].assign(graph.NumNodes(NodeType::kChild), 1);
  } else {
    if (outputs.size() != graph.NumNodes(NodeType::kChild)) throw InvalidArgument("output mask length differs from child count");
    need[0].assign(outputs.begin(), outputs.end());
  }
  need[1].assign(graph.NumNodes(NodeType::kPerson), 0);
  for (int k = kNumLayers - 1; k >= 0; --k) {
    std::array<std::vector<uint8_t>, 2> below;
    below[0].assign(need[0].size(), 0);
    below[1].assign(need[1].size(), 0);
    for (const TypeSlots& ts : layout.layers[k]) {
      const size_t ti = TypeIndex(ts.type);
      std::vector<int32_t>& rows = active[k][ti];
      for (size_t v = 0; v < need[ti].size(); ++v) {
        if (!need[ti][v]) continue;
        rows.push_back(static_cast<int32_t>(v));
        below[ti][v] = 1;
      }
      for (const RelationSlots& rs : ts.relations) {
        const auto& in = graph.Adjacency(rs.relation).in;
        auto& mark = below[TypeIndex(synthpop::SourceType(rs.relation))];
        for (int32_t v : rows) {
          for (int32_t u : in.Row(static_cast<size_t>(v))) mark[static_cast<size_t>(u)] = 1;
        }
      }
    }
    need = std::move(below);
  }
  return active;
}

}  // namespace

GnnModel InitGnn(const HeteroGraph& graph, const GnnConfig& config) {
  config.Validate();
  GnnModel m;
  m.config = config;
  m.graph_schema_hash = graph.SchemaHash();
  m.context = graph.context;
  m.child_feature_names = graph.child_feature_names;
  m.person_feature_names = graph.person_feature_names;
  m.relations = graph.PresentRelations();
  m.layout = BuildLayout(config, graph.child_feature_names.size(), graph.person_feature_names.size(), m.relations,
                         &m.params);
  Rng rng(DeriveSeed(config.rng_seed, 0x1417));
  for (auto& p : m.params) {
    if (p.name.ends_with(".b") || p.name.ends_with(".bias")) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.Uniform(-limit, limit);
  }
  return m;
}

ForwardResult GnnForward(const GnnModel& model, const HeteroGraph& graph, Mode mode, ForwardCache* cache_out,
                         uint64_t dropout_stream, std::span<const uint8_t> outputs) {
  if (static_cast<size_t>(graph.child_features.cols()) != model.child_feature_names.size() ||
      static_cast<size_t>(graph.person_features.cols()) != model.person_feature_names.size()) {
    throw InvalidArgument("graph feature widths do not match the GNN model");
  }
  const auto& P = model.params;
  const auto& L = model.layout;
  const GnnConfig& cfg = model.config;
  ForwardCache local;
  ForwardCache& cache = cache_out ? *cache_out : local;
  cache = ForwardCache{};

  for (NodeType t : {NodeType::kChild, NodeType::kPerson}) {
    const size_t ti = TypeIndex(t);
    if (L.projection_w[ti] < 0) continue;
    RowMatrix h0 = graph.Features(t) * P[L.projection_w[ti]].value;
    h0.rowwise() += P[L.projection_b[ti]].value.row(0);
    CheckFinite(h0, 0, std::string(TypeName(t)) + " projection");
    cache.h0[ti] = std::move(h0);
  }

  const auto active = ActiveRows(L, graph, outputs);
  const bool train = mode == Mode::kTrain && cfg.dropout > 0.0;
  const double keep = 1.0 - cfg.dropout;
  Rng rng(DeriveSeed(cfg.rng_seed, 0x100000 + dropout_stream));
  for (int k = 0; k < kNumLayers; ++k) {
    for (const TypeSlots& ts : L.layers[k]) {
      ForwardCache::TypeCache tc;
      tc.type = ts.type;
      tc.rows = active[k][TypeIndex(ts.type)];
      const RowMatrix& full_self = LayerInput(cache, k, ts.type);
      tc.position.assign(static_cast<size_t>(full_self.rows()), -1);
      for (size_t i = 0; i < tc.rows.size(); ++i) tc.position[static_cast<size_t>(tc.rows[i])] = static_cast<int32_t>(i);
      const Eigen::Index n = static_cast<Eigen::Index>(tc.rows.size());
      const Eigen::Index h = cfg.hidden_dim;
      const RowMatrix self = full_self(tc.rows, Eigen::all);
      for (const RelationSlots& rs : ts.relations) {
        ForwardCache::RelationCache rc;
        rc.relation = rs.relation;
        const RowMatrix& src = LayerInput(cache, k, synthpop::SourceType(rs.relation));
        rc.aggregate = Aggregate(graph.Adjacency(rs.relation).in, tc.rows, src,
                                 cfg.aggregators[static_cast<size_t>(rs.relation)], &rc.argmax);
        rc.message = rc.aggregate * P[rs.neighbor].value + self * P[rs.self].value;
        CheckFinite(rc.message, k + 1, std::string(synthpop::RelationName(rs.relation)) + " message");
        tc.relations.push_back(std::move(rc));
      }
      const Eigen::Index nr = static_cast<Eigen::Index>(tc.relations.size());
      const Eigen::Index merged = nr == 0 ? 0 : (cfg.cross_type == CrossTypeMerge::kMean ? h : nr * h);
      tc.input.resize(n, h + merged);
      tc.input.leftCols(h) = self;
      if (nr > 0) {
        if (cfg.cross_type == CrossTypeMerge::kMean) {
          auto block = tc.input.rightCols(h);
          block.setZero();
          for (const auto& rc : tc.relations) block += rc.message;
          block /= static_cast<double>(nr);
        } else {
          for (Eigen::Index j = 0; j < nr; ++j) tc.input.middleCols(h + j * h, h) = tc.relations[j].message;
        }
      }
      tc.pre = tc.input * P[ts.update].value;
      tc.pre.rowwise() += P[ts.bias].value.row(0);
      tc.relu = tc.pre.cwiseMax(0.0);
      RowMatrix out = tc.relu;
      if (cfg.layer_normalize) {
        tc.norms = (tc.relu.rowwise().squaredNorm().array() + kNormEpsilon).sqrt();
        out = tc.norms.cwiseInverse().asDiagonal() * tc.relu;
      }
      if (train) {
        tc.dropout_mask.resize(n, h);
        for (Eigen::Index i = 0; i < tc.dropout_mask.size(); ++i) {
          tc.dropout_mask.data()[i] = rng.Uniform() < keep ? 1.0 / keep : 0.0;
        }
        out = out.cwiseProduct(tc.dropout_mask);
      }
      CheckFinite(out, k + 1, std::string(TypeName(ts.type)) + " update");
      if (n == full_self.rows()) {
        tc.output = std::move(out);
      } else {
        tc.output = RowMatrix::Zero(full_self.rows(), h);
        tc.output(tc.rows, Eigen::all) = out;
      }
      cache.layers[k].push_back(std::move(tc));
    }
  }

  const RowMatrix& final_child = LayerInput(cache, kNumLayers, NodeType::kChild);
  cache.logits = final_child * P[L.head_w].value.col(0);
  cache.logits.array() += P[L.head_b].value(0, 0);
  cache.valid = true;

  ForwardResult result;
  result.probabilities.resize(static_cast<size_t>(cache.logits.size()));
  for (Eigen::Index i = 0; i < cache.logits.size(); ++i) result.probabilities[static_cast<size_t>(i)] = Sigmoid(cache.logits[i]);
  result.embeddings = final_child;
  return result;
}

double MaskedLogLoss(const Eigen::VectorXd& logits, std::span<const int> outcomes, std::span<const uint8_t> mask) {
  double s = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    s += LogLossFromLogit(logits[static_cast<Eigen::Index>(i)], outcomes[i]);
    ++n;
  }
  if (n == 0) throw InvalidArgument("empty loss mask");
  return s / static_cast<double>(n);
}

std::vector<RowMatrix> GnnBackward(const GnnModel& model, const HeteroGraph& graph, const ForwardCache& cache,
                                   std::span<const int> outcomes, std::span<const uint8_t> mask) {
  if (!cache.valid) throw InvalidArgument("GnnBackward needs the cache of a forward pass");
  const size_t nc = graph.NumNodes(NodeType::kChild);
  if (outcomes.size() != nc || mask.size() != nc) throw InvalidArgument("outcome/mask length differs from child count");
  const auto& P = model.params;
  const auto& L = model.layout;
  const GnnConfig& cfg = model.config;
  const Eigen::Index h = cfg.hidden_dim;

  std::vector<RowMatrix> grads;
  grads.reserve(P.size());
  for (const auto& p : P) grads.push_back(RowMatrix::Zero(p.value.rows(), p.value.cols()));

  size_t n_mask = 0;
  for (uint8_t m : mask) n_mask += m != 0;
  if (n_mask == 0) throw InvalidArgument("empty loss mask");
  Eigen::VectorXd dlogit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nc));
  const auto& last = cache.layers[kNumLayers - 1];
  for (size_t i = 0; i < nc; ++i) {
    if (!mask[i]) continue;
    for (const auto& tc : last) {
      if (tc.type == NodeType::kChild && tc.position[i] < 0) {
        throw InvalidArgument("loss mask includes a child the forward pass did not compute");
      }
    }
    const auto r = static_cast<Eigen::Index>(i);
    dlogit[r] = (Sigmoid(cache.logits[r]) - outcomes[i]) / static_cast<double>(n_mask);
  }
  const RowMatrix& final_child = LayerInput(cache, kNumLayers, NodeType::kChild);
  grads[L.head_w].col(0) = final_child.transpose() * dlogit;
  grads[L.head_b](0, 0) = dlogit.sum();

  std::array<RowMatrix, 2> d_out;
  d_out[0] = dlogit * P[L.head_w].value.col(0).transpose();

  for (int k = kNumLayers - 1; k >= 0; --k) {
    std::array<RowMatrix, 2> d_in;
    for (NodeType t : {NodeType::kChild, NodeType::kPerson}) {
      const size_t ti = TypeIndex(t);
      if (L.projection_w[ti] < 0) continue;
      const RowMatrix& x = LayerInput(cache, k, t);
      d_in[ti] = RowMatrix::Zero(x.rows(), x.cols());
    }
    for (size_t j = 0; j < L.layers[k].size(); ++j) {
      const TypeSlots& ts = L.layers[k][j];
      const auto& tc = cache.layers[k][j];
      const size_t ti = TypeIndex(ts.type);
      if (d_out[ti].size() == 0) continue;
      const bool compact = tc.rows.size() != static_cast<size_t>(d_out[ti].rows());
      RowMatrix d = compact ? RowMatrix(d_out[ti](tc.rows, Eigen::all)) : d_out[ti];
      if (tc.dropout_mask.size() > 0) d = d.cwiseProduct(tc.dropout_mask);
      if (cfg.layer_normalize) {
        // y = r / n(r):  dr = dy / n - r (r . dy) / n^3
        const Eigen::VectorXd dots = tc.relu.cwiseProduct(d).rowwise().sum();
        const Eigen::VectorXd inv = tc.norms.cwiseInverse();
        const Eigen::VectorXd coef = dots.cwiseProduct(inv.cwiseProduct(inv).cwiseProduct(inv));
        d = inv.asDiagonal() * d;
        d -= coef.asDiagonal() * tc.relu;
      }
      d = d.cwiseProduct((tc.pre.array() > 0.0).cast<double>().matrix());
      grads[ts.update] += tc.input.transpose() * d;
      grads[ts.bias].row(0) += d.colwise().sum();
      const RowMatrix d_input = d * P[ts.update].value.transpose();
      RowMatrix d_self = d_input.leftCols(h);
      const Eigen::Index nr = static_cast<Eigen::Index>(ts.relations.size());
      const RowMatrix self = compact ? RowMatrix(LayerInput(cache, k, ts.type)(tc.rows, Eigen::all))
                                     : LayerInput(cache, k, ts.type);
      for (Eigen::Index r = 0; r < nr; ++r) {
        const RelationSlots& rs = ts.relations[r];
        const auto& rc = tc.relations[r];
        RowMatrix dz = cfg.cross_type == CrossTypeMerge::kMean ? RowMatrix(d_input.rightCols(h) / static_cast<double>(nr))
                                                               : RowMatrix(d_input.middleCols(h + r * h, h));
        grads[rs.neighbor] += rc.aggregate.transpose() * dz;
        grads[rs.self] += self.transpose() * dz;
        d_self += dz * P[rs.self].value.transpose();
        const RowMatrix dagg = dz * P[rs.neighbor].value.transpose();

        const auto& adj = graph.Adjacency(rs.relation);
        const Aggregator agg = cfg.aggregators[static_cast<size_t>(rs.relation)];
        const bool use_mean = agg != Aggregator::kMax;
        const bool use_max = agg != Aggregator::kMean;
        const Eigen::Index max_off = agg == Aggregator::kConcat ? h : 0;
        RowMatrix& d_src = d_in[TypeIndex(synthpop::SourceType(rs.relation))];
        // Scatter along out-edges: each source row is owned by one worker.
        ParallelFor(adj.out.rows(), [&](size_t u) {
          const auto targets = adj.out.Row(u);
          const auto row = static_cast<Eigen::Index>(u);
          int32_t prev = -1;
          for (int32_t v : targets) {
            const int32_t cv = tc.position[static_cast<size_t>(v)];
            if (cv < 0) continue;
            if (use_mean) d_src.row(row) += dagg.row(cv).head(h) / static_cast<double>(adj.in.Degree(v));
            if (use_max && v != prev) {
              const int32_t* am = rc.argmax.data() + static_cast<size_t>(cv) * static_cast<size_t>(h);
              for (Eigen::Index c = 0; c < h; ++c) {
                if (am[c] == static_cast<int32_t>(u)) d_src(row, c) += dagg(cv, max_off + c);
              }
            }
            prev = v;
          }
        }, 512);
      }
      if (compact) {
        d_in[ti](tc.rows, Eigen::all) += d_self;
      } else {
        d_in[ti] += d_self;
      }
    }
    d_out = std::move(d_in);
  }

  for (NodeType t : {NodeType::kChild, NodeType::kPerson}) {
    const size_t ti = TypeIndex(t);
    if (L.projection_w[ti] < 0) continue;
    grads[L.projection_w[ti]] = graph.Features(t).transpose() * d_out[ti];
    grads[L.projection_b[ti]].row(0) = d_out[ti].colwise().sum();
  }
  return grads;
}

GnnModel FitGnn(const HeteroGraph& graph, const GnnConfig& config, TrainingHistory* history,
                const FitOptions& options) {
  if (options.enforce_ranges) config.ValidateRanges();
  else config.Validate();
  const size_t nc = graph.NumNodes(NodeType::kChild);
  std::vector<uint8_t> train_mask(nc, 0), val_mask(nc, 0);
  size_t n_train = 0, n_val = 0;
  for (size_t i = 0; i < nc; ++i) {
    if (graph.split[i] == hetgraph::SplitLabel::kTrain) train_mask[i] = 1, ++n_train;
    if (graph.split[i] == hetgraph::SplitLabel::kValidation) val_mask[i] = 1, ++n_val;
  }
  if (n_train == 0 || n_val == 0) throw InvalidArgument("GNN training needs train and validation children");

  GnnModel model = InitGnn(graph, config);
  std::vector<RowMatrix> m1, m2;
  for (const auto& p : model.params) {
    m1.push_back(RowMatrix::Zero(p.value.rows(), p.value.cols()));
    m2.push_back(RowMatrix::Zero(p.value.rows(), p.value.cols()));
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  TrainingHistory local;
  TrainingHistory& hist = history ? *history : local;
  hist = TrainingHistory{};
  std::vector<ParamBlock> best = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  ForwardCache cache;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    GnnForward(model, graph, Mode::kTrain, &cache, static_cast<uint64_t>(epoch), train_mask);
    hist.train_loss.push_back(MaskedLogLoss(cache.logits, graph.outcomes, train_mask));
    const auto grads = GnnBackward(model, graph, cache, graph.outcomes, train_mask);
    const double t = epoch + 1.0;
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    for (size_t b = 0; b < model.params.size(); ++b) {
      m1[b] = kBeta1 * m1[b] + (1.0 - kBeta1) * grads[b];
      m2[b] = kBeta2 * m2[b] + (1.0 - kBeta2) * grads[b].cwiseProduct(grads[b]);
      model.params[b].value.array() -=
          config.learning_rate * (m1[b].array() / c1) / ((m2[b].array() / c2).sqrt() + kEps);
    }
    ForwardCache eval;
    GnnForward(model, graph, Mode::kEval, &eval, 0, val_mask);
    const double val = MaskedLogLoss(eval.logits, graph.outcomes, val_mask);
    hist.validation_loss.push_back(val);
    if (!std::isfinite(val)) {
      throw InvariantError("GNN training diverged: validation loss is non-finite at epoch " + std::to_string(epoch) +
                           " (learning_rate " + FormatDouble(config.learning_rate) + ")");
    }
    if (val < best_val) {
      best_val = val;
      best = model.params;
      hist.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      hist.early_stopped = true;
      break;
    }
  }
  model.params = std::move(best);
  hist.best_validation_loss = best_val;
  return model;
}

std::vector<double> PredictProba(const GnnModel& model, const HeteroGraph& graph) {
  CheckGraph(model, graph);
  return GnnForward(model, graph, Mode::kEval).probabilities;
}

RowMatrix Embeddings(const GnnModel& model, const HeteroGraph& graph) {
  CheckGraph(model, graph);
  return GnnForward(model, graph, Mode::kEval).embeddings;
}

namespace {

Json HeaderJson(const GnnModel& model) {
  Json blocks = Json::array();
  for (const auto& p : model.params) {
    blocks.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  std::vector<std::string> rels;
  for (Relation r : model.relations) rels.emplace_back(synthpop::RelationName(r));
  return Json{{"format", "predgap-gnn"},
              {"version", 1},
              {"config", model.config.ToJson()},
              {"graph_schema_hash", HexU64(model.graph_schema_hash)},
              {"context", model.context},
              {"child_features", model.child_feature_names},
              {"person_features", model.person_feature_names},
              {"relations", rels},
              {"blocks", blocks}};
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t GetU32(std::string_view in, size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

void SaveGnnModel(const GnnModel& model, const std::filesystem::path& path) {
  const std::string header = HeaderJson(model).dump();
  std::string out(kMagic, sizeof(kMagic));
  PutU32(out, static_cast<uint32_t>(header.size()));
  out += header;
  for (const auto& p : model.params) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const uint64_t bits = std::bit_cast<uint64_t>(p.value.data()[i]);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
  WriteFile(path, out);
}

GnnModel LoadGnnModel(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("missing artifact " + path.string() + " (run `train` first)");
  const std::string bytes = ReadFile(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DependencyError(path.string() + " is not a GNN model file");
  }
  const uint32_t header_len = GetU32(bytes, 8);
  if (bytes.size() < 12 + static_cast<size_t>(header_len)) throw DependencyError(path.string() + " is truncated");
  const Json header = Json::parse(bytes.substr(12, header_len));
  GnnModel m;
  m.config = GnnConfig::FromJson(header.at("config"));
  m.graph_schema_hash = std::stoull(header.at("graph_schema_hash").get<std::string>(), nullptr, 16);
  m.context = header.at("context").get<std::string>();
  m.child_feature_names = header.at("child_features").get<std::vector<std::string>>();
  m.person_feature_names = header.at("person_features").get<std::vector<std::string>>();
  for (const auto& r : header.at("relations")) m.relations.push_back(synthpop::ParseRelation(r.get<std::string>()));
  m.layout = BuildLayout(m.config, m.child_feature_names.size(), m.person_feature_names.size(), m.relations, &m.params);
  const auto& blocks = header.at("blocks");
  if (blocks.size() != m.params.size()) throw DependencyError(path.string() + ": parameter layout mismatch");
  size_t pos = 12 + header_len;
  for (size_t b = 0; b < m.params.size(); ++b) {
    auto& p = m.params[b];
    if (blocks[b].at("name").get<std::string>() != p.name || blocks[b].at("rows").get<Eigen::Index>() != p.value.rows() ||
        blocks[b].at("cols").get<Eigen::Index>() != p.value.cols()) {
      throw DependencyError(path.string() + ": parameter block " + p.name + " mismatch");
    }
    const size_t need = static_cast<size_t>(p.value.size()) * 8;
    if (bytes.size() < pos + need) throw DependencyError(path.string() + " is truncated");
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + k])) << (8 * k);
      p.value.data()[i] = std::bit_cast<double>(bits);
      pos += 8;
    }
  }
  if (pos != bytes.size()) throw DependencyError(path.string() + " has trailing bytes");
  return m;
}

Json GnnMetaJson(const GnnModel& model, const TrainingHistory& history) {
  return Json{{"family", "gnn"},
              {"config", model.config.ToJson()},
              {"graph_schema_hash", HexU64(model.graph_schema_hash)},
              {"context", model.context},
              {"n_parameters", model.NumParameters()},
              {"layers", kNumLayers},
              {"update", "relu(linear([h_prev; merged]))"},
              {"dropout_placement", "after ReLU and normalization"},
              {"relation_order", "classmates, parents, children, parent_or_child, neighbors"},
              {"training",
               {{"optimizer", "adam(0.9, 0.999)"},
                {"epochs_run", history.train_loss.size()},
                {"best_epoch", history.best_epoch},
                {"best_validation_loss", history.best_validation_loss},
                {"early_stopped", history.early_stopped},
                {"train_loss", history.train_loss},
                {"validation_loss", history.validation_loss}}}};
}

void WriteEmbeddingsCsv(const HeteroGraph& graph, const RowMatrix& embeddings, const std::filesystem::path& path) {
  if (static_cast<size_t>(embeddings.rows()) != graph.child_ids.size()) {
    throw InvalidArgument("embedding rows differ from child count");
  }
  CsvWriter w(path);
  std::vector<std::string> header = {"child_id"};
  for (Eigen::Index j = 0; j < embeddings.cols(); ++j) header.push_back("h" + std::to_string(j));
  w.WriteRow(header);
  std::vector<std::string> row(header.size());
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    row[0] = std::to_string(graph.child_ids[static_cast<size_t>(i)]);
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j) row[static_cast<size_t>(j) + 1] = FormatDouble(embeddings(i, j));
    w.WriteRow(row);
  }
  w.Close();
}

}  // namespace predgap::model_gnn
