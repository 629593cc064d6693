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

#ifndef PREDGAP_MODEL_GNN_GNN_MODEL_HPP_
#define PREDGAP_MODEL_GNN_GNN_MODEL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "common/io.hpp"
#include "common/matrix.hpp"
#include "hetgraph/hetero_graph.hpp"

namespace predgap::model_gnn {

using hetgraph::HeteroGraph;
using synthpop::NodeType;
using synthpop::Relation;

inline constexpr int kNumLayers = 2;

// kConcat aggregates [mean, max] and doubles the message width.
enum class Aggregator : uint8_t { kMean, kMax, kConcat };
enum class CrossTypeMerge : uint8_t { kMean, kConcat };
std::string_view AggregatorName(Aggregator a);
Aggregator ParseAggregator(std::string_view s);
std::string_view CrossTypeMergeName(CrossTypeMerge m);
CrossTypeMerge ParseCrossTypeMerge(std::string_view s);

struct GnnConfig {
  int hidden_dim = 16;
  double dropout = 0.1;
  double learning_rate = 0.02;
  // Indexed by Relation.
  std::array<Aggregator, synthpop::kNumRelations> aggregators = {
      Aggregator::kMean, Aggregator::kConcat, Aggregator::kConcat, Aggregator::kConcat, Aggregator::kConcat};
  CrossTypeMerge cross_type = CrossTypeMerge::kConcat;
  bool layer_normalize = true;
  int max_epochs = 200;
  int patience = 20;
  uint64_t rng_seed = 1;

  // Structural checks.
  void Validate() const;
  // Tuning ranges: hidden_dim [16, 64], dropout [0.1, 0.3], learning rate
  // [0.01, 0.1].
  void ValidateRanges() const;
  Json ToJson() const;
  static GnnConfig FromJson(const Json& j);
};

struct ParamBlock {
  std::string name;
  RowMatrix value;
};

// Positions of the parameter blocks in GnnModel::params; -1 when absent.
struct RelationSlots {
  Relation relation;
  int self = -1;
  int neighbor = -1;
};
struct TypeSlots {
  NodeType type;
  std::vector<RelationSlots> relations;  // enum order
  int update = -1;
  int bias = -1;
};
struct Layout {
  std::array<int, 2> projection_w = {-1, -1};  // by NodeType
  std::array<int, 2> projection_b = {-1, -1};
  std::array<std::vector<TypeSlots>, kNumLayers> layers;
  int head_w = -1;
  int head_b = -1;
};

struct GnnModel {
  GnnConfig config;
  uint64_t graph_schema_hash = 0;
  std::string context;
  std::vector<std::string> child_feature_names;
  std::vector<std::string> person_feature_names;
  std::vector<Relation> relations;
  std::vector<ParamBlock> params;
  Layout layout;

  size_t NumParameters() const;
};

// Glorot-uniform weights, zero biases, drawn from config.rng_seed.
GnnModel InitGnn(const HeteroGraph& graph, const GnnConfig& config);

enum class Mode { kTrain, kEval };

// Activations kept for the reverse pass. Filled by GnnForward.
//
// A layer only computes the nodes the next layer reads (all children at the
// last layer; their in-neighbors and themselves before that). Per-row
// matrices are compact over `rows`; `output` is full size with zeros for
// nodes that were skipped.
struct ForwardCache {
  struct RelationCache {
    Relation relation;
    RowMatrix aggregate;               // active x (1 or 2)H
    std::vector<int32_t> argmax;       // active x H source node per max channel, -1 if isolated
    RowMatrix message;                 // z_r, active x H
  };
  struct TypeCache {
    NodeType type;
    std::vector<int32_t> rows;      // active nodes, ascending
    std::vector<int32_t> position;  // node -> compact row, -1 if inactive
    std::vector<RelationCache> relations;
    RowMatrix input;        // [h_prev ; merged]
    RowMatrix pre;          // before ReLU
    RowMatrix relu;         // after ReLU
    Eigen::VectorXd norms;  // smoothed row norms when normalizing
    RowMatrix dropout_mask; // scaled keep mask, empty in eval mode
    RowMatrix output;
  };
  bool valid = false;
  std::array<RowMatrix, 2> h0;  // by NodeType
  std::array<std::vector<TypeCache>, kNumLayers> layers;
  Eigen::VectorXd logits;
};

struct ForwardResult {
  std::vector<double> probabilities;  // per child
  RowMatrix embeddings;               // final child embeddings
};

// Dropout masks in train mode come from DeriveSeed(config.rng_seed,
// dropout_stream), so a training epoch is reproducible. A non-empty
// `outputs` mask limits the work to the receptive field of those children;
// other children's probabilities are then meaningless. Throws
// InvariantError naming the layer and relation on a non-finite activation.
ForwardResult GnnForward(const GnnModel& model, const HeteroGraph& graph, Mode mode, ForwardCache* cache = nullptr,
                         uint64_t dropout_stream = 0, std::span<const uint8_t> outputs = {});

// Gradients of the mean log-loss over children with mask[i] != 0, one
// matrix per parameter block. Throws InvalidArgument without a valid cache.
std::vector<RowMatrix> GnnBackward(const GnnModel& model, const HeteroGraph& graph, const ForwardCache& cache,
                                   std::span<const int> outcomes, std::span<const uint8_t> mask);

double MaskedLogLoss(const Eigen::VectorXd& logits, std::span<const int> outcomes, std::span<const uint8_t> mask);

struct TrainingHistory {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
  bool early_stopped = false;
};

struct FitOptions {
  bool enforce_ranges = true;
};

// Full-batch Adam on the train-split children, keeping the parameters with
// the lowest validation-split log-loss. Test-split children only take part
// in message passing. Throws InvalidArgument without train and validation
// labels, InvariantError if the validation loss becomes non-finite.
GnnModel FitGnn(const HeteroGraph& graph, const GnnConfig& config, TrainingHistory* history = nullptr,
                const FitOptions& options = {});

std::vector<double> PredictProba(const GnnModel& model, const HeteroGraph& graph);
RowMatrix Embeddings(const GnnModel& model, const HeteroGraph& graph);

// model_gnn.bin: 8-byte magic "PGGNN001", u32 header length, UTF-8 JSON
// header (config, schema, block names and shapes), then each block as
// row-major little-endian f64 in header order.
void SaveGnnModel(const GnnModel& model, const std::filesystem::path& path);
GnnModel LoadGnnModel(const std::filesystem::path& path);
Json GnnMetaJson(const GnnModel& model, const TrainingHistory& history);

void WriteEmbeddingsCsv(const HeteroGraph& graph, const RowMatrix& embeddings, const std::filesystem::path& path);

}  // namespace predgap::model_gnn

#endif  // PREDGAP_MODEL_GNN_GNN_MODEL_HPP_
