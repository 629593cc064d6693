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

#include "pipeline/stages.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "common/error.hpp"
#include "embedpca/pca.hpp"
#include "evalgap/bootstrap.hpp"
#include "evalgap/metrics.hpp"
#include "features/feature_table.hpp"
#include "hetgraph/hetero_graph.hpp"
#include "model_gbt/boost_model.hpp"
#include "model_gnn/gnn_model.hpp"
#include "model_linear/linear_model.hpp"
#include "pipeline/subgroups.hpp"
#include "synthpop/registry.hpp"
#include "synthpop/summary.hpp"
#include "tuner/search.hpp"

namespace predgap::pipeline {

namespace fs = std::filesystem;
using evalgap::SplitSpec;
using features::ContextSetSpec;
using features::FeatureTable;

namespace {

std::function<void(std::string_view)>& Sink() {
  static std::function<void(std::string_view)> sink = [](std::string_view msg) {
    std::cerr << "predgap: " << msg << '\n';
  };
  return sink;
}

void Log(const std::string& msg) {
  if (Sink()) Sink()(msg);
}

std::string Rel(const fs::path& p, const fs::path& base) { return p.lexically_relative(base).generic_string(); }

std::vector<fs::path> FilesUnder(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Collects a stage's files and writes its manifest.
class Recorder {
 public:
  Recorder(const RunConfig& config, std::string stage, fs::path base)
      : config_(config), stage_(std::move(stage)), base_(std::move(base)) {}

  void Output(const fs::path& p) { outputs_.push_back(p); }
  void OutputDir(const fs::path& dir) {
    for (const auto& f : FilesUnder(dir)) outputs_.push_back(f);
  }
  void Note(const std::string& n) {
    Log(stage_ + ": " + n);
    notes_.push_back(n);
  }
  Json& extra() { return extra_; }

  void Finish(const fs::path& manifest, const SplitAccess* access) {
    Json files = Json::array();
    std::sort(outputs_.begin(), outputs_.end());
    outputs_.erase(std::unique(outputs_.begin(), outputs_.end()), outputs_.end());
    for (const auto& p : outputs_) {
      files.push_back(Json{{"path", Rel(p, base_)}, {"sha256", Sha256File(p)}, {"bytes", fs::file_size(p)}});
    }
    Json j{{"stage", stage_}, {"seeds", config_.Seeds()}, {"files", files}, {"notes", notes_}};
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    fs::create_directories(manifest.parent_path());
    WriteJsonFile(manifest, j);
    if (access) {
      const fs::path audit = base_ / "audit" / (stage_ + ".json");
      fs::create_directories(audit.parent_path());
      WriteJsonFile(audit, access->AuditJson(stage_));
    }
  }

 private:
  const RunConfig& config_;
  std::string stage_;
  fs::path base_;
  std::vector<fs::path> outputs_;
  std::vector<std::string> notes_;
  Json extra_ = Json::object();
};

fs::path ManifestPath(const RunConfig& c, const std::string& stage) {
  if (stage == "synth") return c.registry_dir() / "manifest.json";
  return c.out_dir() / "manifests" / (stage + ".json");
}

// Re-hashes every file an upstream stage recorded.
Json RequireStage(const RunConfig& c, const std::string& stage) {
  const fs::path manifest = ManifestPath(c, stage);
  if (!fs::exists(manifest)) {
    throw DependencyError("missing artifact '" + manifest.generic_string() + "'; run `predgap " + stage + "` first");
  }
  const Json j = ReadJsonFile(manifest);
  const fs::path base = stage == "synth" ? c.registry_dir() : c.out_dir();
  for (const auto& f : j.at("files")) {
    const fs::path p = base / f.at("path").get<std::string>();
    if (!fs::exists(p)) {
      throw DependencyError("missing artifact '" + p.generic_string() + "'; rerun `predgap " + stage + "`");
    }
    if (Sha256File(p) != f.at("sha256").get<std::string>()) {
      throw DependencyError("artifact '" + p.generic_string() + "' changed after `predgap " + stage +
                            "` wrote it; rerun that stage");
    }
  }
  return j;
}

void RequireFile(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) {
    throw DependencyError("missing artifact '" + p.generic_string() + "'; run `predgap " + producer + "` first");
  }
}

bool HasModel(const RunConfig& c, const std::string& family) {
  const auto m = c.models();
  return std::find(m.begin(), m.end(), family) != m.end();
}

fs::path FeatureDir(const RunConfig& c, const ContextSetSpec& ctx) { return c.out_dir() / "features" / ContextKey(ctx); }
fs::path GraphDir(const RunConfig& c, const ContextSetSpec& ctx) { return c.out_dir() / "graph" / ContextKey(ctx); }
fs::path TuneDir(const RunConfig& c, const std::string& family, const ContextSetSpec& ctx) {
  return c.out_dir() / "tune" / (family + "_" + ContextKey(ctx));
}
fs::path ModelPath(const RunConfig& c, const std::string& family) {
  if (family == "linear") return c.out_dir() / "models" / "model_linear.json";
  if (family == "gbt") return c.out_dir() / "models" / "model_gbt.json";
  return c.out_dir() / "models" / "model_gnn.bin";
}
fs::path PredictionsPath(const RunConfig& c) { return c.out_dir() / "eval" / "predictions.csv"; }

synthpop::Registry LoadCheckedRegistry(const RunConfig& c) {
  RequireStage(c, "synth");
  return synthpop::LoadRegistry(c.registry_dir());
}

SplitSpec LoadSplit(const RunConfig& c, size_t n_children) {
  RequireStage(c, "split");
  SplitSpec s = SplitSpec::FromJson(ReadJsonFile(c.out_dir() / "split.json"));
  if (s.train.size() + s.test.size() != n_children) {
    throw DependencyError("split.json does not match the registry; rerun `predgap split`");
  }
  return s;
}

FeatureTable LoadFeatures(const RunConfig& c, const ContextSetSpec& ctx, const synthpop::Registry& reg) {
  const fs::path dir = FeatureDir(c, ctx);
  RequireFile(dir / "features.csv", "prep");
  FeatureTable t = features::LoadFeatureTable(dir);
  if (t.child_ids.size() != reg.children.size()) {
    throw DependencyError("features in '" + dir.generic_string() + "' do not match the registry; rerun `predgap prep`");
  }
  return t;
}

hetgraph::HeteroGraph LoadGraph(const RunConfig& c, const ContextSetSpec& ctx, const FeatureTable& table) {
  const fs::path dir = GraphDir(c, ctx);
  RequireFile(dir / "graph.schema.json", "prep");
  hetgraph::HeteroGraph g = hetgraph::ImportGraph(dir);
  if (g.child_ids != table.child_ids) throw InvariantError("graph children are not in feature-table order");
  return g;
}

// Tuned configuration when present, otherwise the configured default.
Json ConfigFor(const RunConfig& c, const std::string& family, const ContextSetSpec& ctx, bool* tuned) {
  const fs::path best = TuneDir(c, family, ctx) / "best_config.json";
  if (fs::exists(best)) {
    *tuned = true;
    return ReadJsonFile(best).at("params");
  }
  *tuned = false;
  return family == "gbt" ? c.gbt_defaults().ToJson() : c.gnn_defaults().ToJson();
}

model_gnn::GnnModel TrainGnn(hetgraph::HeteroGraph& graph, SplitAccess& access, const std::vector<int>& labels,
                             const model_gnn::GnnConfig& config, uint64_t inner_seed,
                             model_gnn::TrainingHistory* history) {
  graph.outcomes = access.MaskedLabels(labels);
  tuner::ApplyInnerSplit(graph, access.TrainRows(), {}, inner_seed);
  return model_gnn::FitGnn(graph, config, history);
}

struct Predictions {
  std::vector<size_t> rows;
  std::vector<int64_t> child_ids;
  std::vector<int> y;
  std::vector<std::string> names;
  std::vector<std::vector<double>> probabilities;
};

Predictions LoadPredictions(const RunConfig& c, SplitAccess& access) {
  RequireStage(c, "eval");
  const CsvTable t = ReadCsv(PredictionsPath(c));
  Predictions p;
  p.names = c.models();
  std::vector<size_t> cols;
  for (const auto& m : p.names) {
    const auto it = std::find(t.header.begin(), t.header.end(), m);
    if (it == t.header.end()) {
      throw DependencyError("predictions.csv has no column '" + m + "'; rerun `predgap eval` with that model");
    }
    cols.push_back(static_cast<size_t>(it - t.header.begin()));
  }
  p.probabilities.assign(p.names.size(), {});
  for (const auto& row : t.rows) {
    p.rows.push_back(static_cast<size_t>(ParseInt(row[0])));
    p.child_ids.push_back(ParseInt(row[1]));
    p.y.push_back(static_cast<int>(ParseInt(row[2])));
    for (size_t k = 0; k < cols.size(); ++k) p.probabilities[k].push_back(ParseDouble(row[cols[k]]));
  }
  if (p.rows != access.TestRowsForEvaluation()) {
    throw DependencyError("predictions.csv does not cover the test split; rerun `predgap eval`");
  }
  return p;
}

// ---- stages ----

void StageSynth(const RunConfig& c) {
  Recorder rec(c, "synth", c.registry_dir());
  const auto scenario = c.scenario();
  Log("synth: generating " + std::to_string(scenario.n_children) + " children (" +
      std::string(synthpop::OutcomeModeName(scenario.outcome_mode)) + ")");
  const auto reg = synthpop::GenerateRegistry(scenario);
  synthpop::ValidateRegistry(reg);
  fs::create_directories(c.registry_dir());
  synthpop::SaveRegistry(reg, c.registry_dir());
  synthpop::WriteSummaryCsv(synthpop::RegistrySummary(reg), c.registry_dir() / "summary_table.csv");
  for (const auto& f : FilesUnder(c.registry_dir())) {
    if (f.filename() != "manifest.json") rec.Output(f);
  }
  int positives = 0;
  for (const auto& ch : reg.children) positives += ch.outcome_university;
  rec.extra()["n_children"] = reg.children.size();
  rec.extra()["n_persons"] = reg.persons.size();
  rec.extra()["outcome_rate"] = static_cast<double>(positives) / static_cast<double>(reg.children.size());
  rec.Finish(ManifestPath(c, "synth"), nullptr);
}

void StagePrep(const RunConfig& c) {
  Recorder rec(c, "prep", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  const auto ctx = c.context();
  const auto table = features::BuildFeatureTable(reg, ctx);
  features::SaveFeatureTable(table, FeatureDir(c, ctx));
  rec.OutputDir(FeatureDir(c, ctx));
  for (const auto& col : table.columns) {
    if (!col.note.empty()) rec.Note("column '" + col.name + "': " + col.note);
  }
  if (HasModel(c, "gnn")) {
    const auto graph = hetgraph::BuildHeteroGraph(reg, ctx);
    hetgraph::ExportGraph(graph, GraphDir(c, ctx));
    rec.OutputDir(GraphDir(c, ctx));
  }
  rec.extra()["context"] = ctx.ToString();
  rec.extra()["n_features"] = table.n_cols();
  rec.extra()["schema_hash"] = HexU64(table.SchemaHash());
  Log("prep: " + std::to_string(table.n_cols()) + " feature columns for context " + ctx.ToString());
  rec.Finish(ManifestPath(c, "prep"), nullptr);
}

void StageSplit(const RunConfig& c) {
  Recorder rec(c, "split", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  const SplitSpec s = evalgap::MakeSplit(reg.children.size(), c.split_seed(), c.train_fraction());
  fs::create_directories(c.out_dir());
  WriteJsonFile(c.out_dir() / "split.json", s.ToJson());
  rec.Output(c.out_dir() / "split.json");
  rec.extra()["n_train"] = s.train.size();
  rec.extra()["n_test"] = s.test.size();
  rec.Finish(ManifestPath(c, "split"), nullptr);
}

void StageTune(const RunConfig& c) {
  Recorder rec(c, "tune", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  RequireStage(c, "prep");
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto ctx = c.context();
  const auto table = LoadFeatures(c, ctx, reg);
  const auto labels = features::Outcomes(reg);
  tuner::TuneOptions options;
  options.split_seed = c.inner_split_seed();
  bool any = false;
  if (HasModel(c, "gbt")) {
    any = true;
    const auto space = tuner::SearchSpace::Gbt(c.budget("gbt"), c.tuning_seed());
    options.fixed_trials.clear();
    if (c.tune_baseline()) options.fixed_trials.push_back(c.gbt_defaults().ToJson());
    const auto y = access.MaskedLabels(labels);
    Log("tune: boosting, " + std::to_string(space.budget) + " trials");
    const auto result =
        tuner::TuneGbt(table.Matrix(), y, access.TrainRows(), access.TestIndices(), space, options, c.folds());
    const fs::path dir = TuneDir(c, "gbt", ctx);
    fs::create_directories(dir);
    result.log.WriteCsv(dir / "tuning_log.csv", c.record_time());
    WriteJsonFile(dir / "best_config.json",
                  Json{{"family", "gbt"}, {"context", ctx.ToString()}, {"trial", result.log.best},
                       {"val_loss", *result.log.Best().val_loss}, {"params", result.best.ToJson()}});
    WriteJsonFile(dir / "search_space.json", space.ToJson());
    rec.OutputDir(dir);
    for (const auto& t : result.log.trials) {
      if (!t.val_loss) rec.Note("boosting trial " + std::to_string(t.id) + " failed: " + t.error);
    }
  }
  if (HasModel(c, "gnn")) {
    any = true;
    auto graph = LoadGraph(c, ctx, table);
    graph.outcomes = access.MaskedLabels(labels);
    const auto space = tuner::SearchSpace::Gnn(c.budget("gnn"), c.tuning_seed());
    options.fixed_trials.clear();
    if (c.tune_baseline()) options.fixed_trials.push_back(tuner::FlattenGnnParams(c.gnn_defaults()));
    Log("tune: graph network, " + std::to_string(space.budget) + " trials");
    const auto result =
        tuner::TuneGnn(std::move(graph), access.TrainRows(), access.TestIndices(), c.gnn_defaults(), space, options);
    const fs::path dir = TuneDir(c, "gnn", ctx);
    fs::create_directories(dir);
    result.log.WriteCsv(dir / "tuning_log.csv", c.record_time());
    WriteJsonFile(dir / "best_config.json",
                  Json{{"family", "gnn"}, {"context", ctx.ToString()}, {"trial", result.log.best},
                       {"val_loss", *result.log.Best().val_loss}, {"params", result.best.ToJson()}});
    WriteJsonFile(dir / "search_space.json", space.ToJson());
    rec.OutputDir(dir);
    for (const auto& t : result.log.trials) {
      if (!t.val_loss) rec.Note("graph network trial " + std::to_string(t.id) + " failed: " + t.error);
    }
  }
  if (!any) rec.Note("no tunable model family selected");
  rec.Finish(ManifestPath(c, "tune"), &access);
}

void StageTrain(const RunConfig& c) {
  Recorder rec(c, "train", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  RequireStage(c, "prep");
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto ctx = c.context();
  const auto table = LoadFeatures(c, ctx, reg);
  const auto labels = features::Outcomes(reg);
  const auto y = access.MaskedLabels(labels);
  fs::create_directories(c.out_dir() / "models");
  Json sources = Json::object();
  for (const auto& family : c.models()) {
    Log("train: " + family);
    if (family == "linear") {
      const auto m = model_linear::FitLinear(table, y, access.TrainRows());
      if (!m.converged) rec.Note("linear model did not converge");
      if (m.separation_warning) rec.Note("linear model shows signs of separation");
      model_linear::SaveLinearModel(m, ModelPath(c, family));
      sources[family] = "none";
    } else if (family == "gbt") {
      bool tuned = false;
      const auto params = model_gbt::GbtParams::FromJson(ConfigFor(c, family, ctx, &tuned));
      if (!tuned) rec.Note("no tuned boosting config for context " + ContextKey(ctx) + "; using defaults");
      model_gbt::SaveBoostModel(model_gbt::FitGbt(table, y, access.TrainRows(), params), ModelPath(c, family));
      sources[family] = tuned ? "tuned" : "default";
    } else {
      bool tuned = false;
      const auto config = model_gnn::GnnConfig::FromJson(ConfigFor(c, family, ctx, &tuned));
      if (!tuned) rec.Note("no tuned graph network config for context " + ContextKey(ctx) + "; using defaults");
      auto graph = LoadGraph(c, ctx, table);
      model_gnn::TrainingHistory history;
      const auto model = TrainGnn(graph, access, labels, config, c.inner_split_seed(), &history);
      model_gnn::SaveGnnModel(model, ModelPath(c, family));
      WriteJsonFile(c.out_dir() / "models" / "model_gnn.meta.json", model_gnn::GnnMetaJson(model, history));
      rec.Output(c.out_dir() / "models" / "model_gnn.meta.json");
      sources[family] = tuned ? "tuned" : "default";
    }
    rec.Output(ModelPath(c, family));
  }
  rec.extra()["config_source"] = sources;
  rec.extra()["context"] = ctx.ToString();
  rec.Finish(ManifestPath(c, "train"), &access);
}

std::vector<double> PredictAll(const RunConfig& c, const std::string& family, const FeatureTable& table) {
  RequireFile(ModelPath(c, family), "train");
  if (family == "linear") return model_linear::PredictProba(model_linear::LoadLinearModel(ModelPath(c, family)), table);
  if (family == "gbt") return model_gbt::PredictProba(model_gbt::LoadBoostModel(ModelPath(c, family)), table);
  const auto graph = LoadGraph(c, c.context(), table);
  return model_gnn::PredictProba(model_gnn::LoadGnnModel(ModelPath(c, family)), graph);
}

void StageEval(const RunConfig& c) {
  Recorder rec(c, "eval", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  RequireStage(c, "prep");
  RequireStage(c, "train");
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto table = LoadFeatures(c, c.context(), reg);
  const auto labels = features::Outcomes(reg);
  const auto& test = access.TestRowsForEvaluation();

  const auto names = c.models();
  std::vector<std::vector<double>> probs;
  for (const auto& family : names) {
    const auto all = PredictAll(c, family, table);
    std::vector<double> p;
    for (size_t r : test) p.push_back(all[r]);
    probs.push_back(std::move(p));
  }
  std::vector<int> y;
  for (size_t r : test) y.push_back(labels[r]);

  const fs::path dir = c.out_dir() / "eval";
  fs::create_directories(dir);
  {
    CsvWriter w(PredictionsPath(c));
    std::vector<std::string> header = {"row", "child_id", "outcome"};
    header.insert(header.end(), names.begin(), names.end());
    w.WriteRow(header);
    for (size_t i = 0; i < test.size(); ++i) {
      std::vector<std::string> row = {std::to_string(test[i]), std::to_string(table.child_ids[test[i]]),
                                      std::to_string(y[i])};
      for (const auto& p : probs) row.push_back(FormatDouble(p[i]));
      w.WriteRow(row);
    }
    w.Close();
  }
  rec.Output(PredictionsPath(c));

  evalgap::EvalReport report;
  report.run = c.run_name();
  report.n_test = test.size();
  report.threshold = c.threshold();
  report.options = c.bootstrap();
  const auto pairs = evalgap::DefaultGapPairs(names.size());
  for (auto metric : {evalgap::Metric::kMcc, evalgap::Metric::kAuc, evalgap::Metric::kLogLoss, evalgap::Metric::kF1}) {
    const auto result = evalgap::BootstrapCompare({metric, c.threshold()}, y, names, probs, pairs, c.bootstrap());
    report.estimates.insert(report.estimates.end(), result.models.begin(), result.models.end());
    report.gaps.insert(report.gaps.end(), result.gaps.begin(), result.gaps.end());
  }
  for (const auto& e : report.estimates) {
    if (!(e.ci.lo <= e.ci.point && e.ci.point <= e.ci.hi)) throw InvariantError("interval misses its point estimate");
  }
  const fs::path json = dir / ("eval_" + c.run_name() + ".json");
  const fs::path csv = dir / ("eval_" + c.run_name() + ".csv");
  WriteJsonFile(json, report.ToJson());
  evalgap::WriteEvalCsv(report, csv);
  rec.Output(json);
  rec.Output(csv);
  rec.Finish(ManifestPath(c, "eval"), &access);
}

void StageGap(const RunConfig& c) {
  Recorder rec(c, "gap", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto p = LoadPredictions(c, access);
  const auto pairs = evalgap::DefaultGapPairs(p.names.size());
  const fs::path dir = c.out_dir() / "gap";
  fs::create_directories(dir);
  for (auto metric : {evalgap::Metric::kMcc, evalgap::Metric::kAuc}) {
    const auto result = evalgap::BootstrapCompare({metric, c.threshold()}, p.y, p.names, p.probabilities, pairs,
                                                  c.bootstrap());
    const std::string suffix = metric == evalgap::Metric::kMcc ? "" : "_auc";
    const fs::path out = dir / ("gap_" + c.run_name() + suffix + ".csv");
    evalgap::WriteGapCsv(result.gaps, out);
    rec.Output(out);
    if (metric == evalgap::Metric::kMcc) {
      for (const auto& g : result.gaps) {
        Log("gap: " + g.model_b + " - " + g.model_a + " MCC " + FormatDouble(g.ci.point) + " [" +
            FormatDouble(g.ci.lo) + ", " + FormatDouble(g.ci.hi) + "]");
      }
    }
  }
  rec.Finish(ManifestPath(c, "gap"), &access);
}

void StageNested(const RunConfig& c) {
  Recorder rec(c, "nested", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto labels = features::Outcomes(reg);
  const auto y_train = access.MaskedLabels(labels);
  const features::RegistryView view(reg);
  const auto names = c.nested_models();

  std::vector<evalgap::NestedRow> rows;
  std::vector<std::pair<std::string, evalgap::GapEstimate>> gaps;
  for (size_t k = 1; k <= features::NestedContextOrder().size(); ++k) {
    const auto ctx = ContextSetSpec::Prefix(k);
    const auto table = features::BuildFeatureTable(view, ctx);
    std::vector<std::vector<double>> probs;
    std::vector<bool> defaults;
    for (const auto& family : names) {
      Log("nested: " + ContextKey(ctx) + " / " + family);
      std::vector<double> all;
      bool tuned = true;
      if (family == "linear") {
        all = model_linear::PredictProba(model_linear::FitLinear(table, y_train, access.TrainRows()), table);
      } else if (family == "gbt") {
        const auto params = model_gbt::GbtParams::FromJson(ConfigFor(c, family, ctx, &tuned));
        all = model_gbt::PredictProba(model_gbt::FitGbt(table, y_train, access.TrainRows(), params), table);
      } else {
        const auto config = model_gnn::GnnConfig::FromJson(ConfigFor(c, family, ctx, &tuned));
        auto graph = hetgraph::BuildHeteroGraph(reg, ctx);
        const auto model = TrainGnn(graph, access, labels, config, c.inner_split_seed(), nullptr);
        all = model_gnn::PredictProba(model, graph);
      }
      if (!tuned) rec.Note("no tuned " + family + " config for context " + ContextKey(ctx) + "; using defaults");
      defaults.push_back(!tuned);
      std::vector<double> p;
      for (size_t r : access.TestRowsForEvaluation()) p.push_back(all[r]);
      probs.push_back(std::move(p));
    }
    std::vector<int> y;
    for (size_t r : access.TestRowsForEvaluation()) y.push_back(labels[r]);
    const auto result = evalgap::BootstrapCompare({evalgap::Metric::kMcc, c.threshold()}, y, names, probs,
                                                  evalgap::DefaultGapPairs(names.size()), c.bootstrap());
    for (size_t m = 0; m < names.size(); ++m) {
      rows.push_back({ctx.ToString(), ctx.Label(), names[m], table.n_cols(), result.models[m].ci, defaults[m]});
    }
    for (const auto& g : result.gaps) gaps.emplace_back(ctx.ToString(), g);
  }
  const fs::path dir = c.out_dir() / "nested";
  fs::create_directories(dir);
  evalgap::WriteNestedCsv(rows, dir / "nested.csv");
  {
    CsvWriter w(dir / "nested_gaps.csv");
    w.WriteRow({"context", "model_a", "model_b", "metric", "gap", "ci_lo", "ci_hi"});
    for (const auto& [ctx, g] : gaps) {
      w.WriteRow({ctx, g.model_a, g.model_b, "mcc", FormatDouble(g.ci.point), FormatDouble(g.ci.lo),
                  FormatDouble(g.ci.hi)});
    }
    w.Close();
  }
  rec.Output(dir / "nested.csv");
  rec.Output(dir / "nested_gaps.csv");
  rec.Finish(ManifestPath(c, "nested"), &access);
}

void StageDisagg(const RunConfig& c) {
  Recorder rec(c, "disagg", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto p = LoadPredictions(c, access);
  const features::RegistryView view(reg);
  const auto raw = features::RawInputColumns(view);
  const fs::path dir = c.out_dir() / "disagg";
  fs::create_directories(dir);
  const auto pairs = evalgap::DefaultGapPairs(p.names.size());

  auto test_values = [&](const SubgroupVariable& v) {
    std::vector<std::optional<double>> out;
    for (size_t r : p.rows) out.push_back(v.values[r]);
    return out;
  };

  for (const auto& req : c.subgroups()) {
    SubgroupVariable var = LoadSubgroupVariable(raw, req.spec.variable);
    evalgap::SubgroupSpec spec = req.spec;
    spec.labels = var.labels;
    std::vector<std::optional<double>> values = test_values(var);
    if (req.by) {
      const SubgroupVariable by = LoadSubgroupVariable(raw, *req.by);
      evalgap::SubgroupSpec by_spec;
      by_spec.variable = *req.by;
      by_spec.labels = by.labels;
      const auto gb = evalgap::AssignGroups(test_values(by), by_spec);
      const auto gv = evalgap::AssignGroups(values, spec);
      evalgap::SubgroupSpec crossed = spec;
      crossed.variable = req.FileKey();
      crossed.binning = evalgap::Binning::kCategorical;
      crossed.labels.clear();
      const double width = static_cast<double>(gv.labels.size());
      for (size_t a = 0; a < gb.labels.size(); ++a) {
        for (size_t b = 0; b < gv.labels.size(); ++b) {
          crossed.labels[static_cast<double>(a) * width + static_cast<double>(b)] = gb.labels[a] + " | " + gv.labels[b];
        }
      }
      for (size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<double>(gb.group[i]) * width + static_cast<double>(gv.group[i]);
      }
      spec = std::move(crossed);
    }
    const fs::path out = dir / ("disagg_" + req.FileKey() + ".csv");
    try {
      const auto d = evalgap::Disaggregate(spec, values, p.y, p.names, p.probabilities, pairs,
                                           {evalgap::Metric::kMcc, c.threshold()}, c.bootstrap());
      evalgap::WriteDisaggregationCsv(d, out);
      rec.Output(out);
      std::string suppressed;
      size_t count = 0;
      for (const auto& g : d.groups) {
        if (!g.suppressed) continue;
        suppressed += (count++ ? ", " : "") + g.label + " (n=" + std::to_string(g.n) + ")";
      }
      if (count) {
        rec.Note(req.FileKey() + ": " + std::to_string(count) + " of " + std::to_string(d.groups.size()) +
                 " groups below the minimum size: " + suppressed);
      }
    } catch (const InvalidArgument& e) {
      rec.Note(req.FileKey() + ": skipped, " + e.what());
    }
  }
  rec.Finish(ManifestPath(c, "disagg"), &access);
}

void StageAgree(const RunConfig& c) {
  Recorder rec(c, "agree", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto p = LoadPredictions(c, access);
  std::vector<std::vector<int>> pred;
  for (const auto& probs : p.probabilities) pred.push_back(evalgap::Classify(probs, c.threshold()));
  std::vector<evalgap::NamedAgreement> rows;
  for (const auto& [a, b] : evalgap::DefaultGapPairs(p.names.size())) {
    const auto t = evalgap::AgreementTable(p.y, pred[a], pred[b]);
    if (!t.Consistent()) throw InvariantError("agreement table is inconsistent");
    rows.push_back({p.names[a], p.names[b], t});
  }
  const fs::path out = c.out_dir() / "agree" / "agreement.csv";
  fs::create_directories(out.parent_path());
  evalgap::WriteAgreementCsv(rows, out);
  rec.Output(out);
  rec.Finish(ManifestPath(c, "agree"), &access);
}

void StageSweep(const RunConfig& c) {
  Recorder rec(c, "sweep", c.out_dir());
  const auto reg = LoadCheckedRegistry(c);
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto p = LoadPredictions(c, access);
  const auto thresholds = c.sweep_thresholds();
  std::vector<evalgap::NamedSweep> sweeps;
  for (size_t m = 0; m < p.names.size(); ++m) {
    sweeps.push_back({p.names[m], evalgap::F1Sweep(p.y, p.probabilities[m], thresholds)});
  }
  const fs::path out = c.out_dir() / "sweep" / "threshold_sweep.csv";
  fs::create_directories(out.parent_path());
  evalgap::WriteSweepCsv(sweeps, out);
  rec.Output(out);
  rec.Finish(ManifestPath(c, "sweep"), &access);
}

void StageEmbed(const RunConfig& c) {
  Recorder rec(c, "embed", c.out_dir());
  if (!HasModel(c, "gnn")) {
    throw ConfigError("the embed stage needs the graph network; add \"gnn\" to 'models'");
  }
  const auto reg = LoadCheckedRegistry(c);
  RequireStage(c, "train");
  SplitAccess access(LoadSplit(c, reg.children.size()));
  const auto ctx = c.context();
  const auto table = LoadFeatures(c, ctx, reg);
  const auto graph = LoadGraph(c, ctx, table);
  const auto model = model_gnn::LoadGnnModel(ModelPath(c, "gnn"));
  const auto labels = features::Outcomes(reg);
  const fs::path dir = c.out_dir() / "embed";
  fs::create_directories(dir);

  auto columns = [](Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index k = 0; k < n; ++k) out.push_back("h" + std::to_string(k));
    return out;
  };
  const RowMatrix emb = model_gnn::Embeddings(model, graph);
  model_gnn::WriteEmbeddingsCsv(graph, emb, dir / "embeddings.csv");
  rec.Output(dir / "embeddings.csv");
  const auto pca = embedpca::Pca(emb, columns(emb.cols()));
  for (const auto& n : pca.notes) rec.Note(n);
  const int n_comp = std::min<int>(c.embed_components(), static_cast<int>(pca.scores.cols()));

  std::vector<embedpca::Covariate> covariates;
  for (const auto& key : c.embed_restricted()) {
    const auto rctx = ContextSetSpec::Parse(key);
    Log("embed: restricted graph network for context " + ContextKey(rctx));
    auto rgraph = hetgraph::BuildHeteroGraph(reg, rctx);
    const auto rmodel = TrainGnn(rgraph, access, labels, model.config, c.inner_split_seed(), nullptr);
    const RowMatrix remb = model_gnn::Embeddings(rmodel, rgraph);
    const auto rpca = embedpca::Pca(remb, columns(remb.cols()));
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(n_comp, rpca.scores.cols()); ++k) {
      covariates.push_back({"PCA" + std::to_string(k + 1) + " " + ContextKey(rctx), rpca.scores.col(k)});
    }
  }
  for (const auto& col : table.columns) {
    covariates.push_back({col.name, Eigen::Map<const Eigen::VectorXd>(col.values.data(),
                                                                      static_cast<Eigen::Index>(col.values.size()))});
  }
  // The outcome covariate spans every child, test rows included.
  (void)access.TestRowsForEvaluation();
  Eigen::VectorXd outcome(static_cast<Eigen::Index>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) outcome[static_cast<Eigen::Index>(i)] = labels[i];
  covariates.push_back({"Outcome", outcome});

  const auto correlations = embedpca::ComponentCorrelations(pca, n_comp, covariates);
  for (const auto& n : correlations.notes) rec.Note(n);
  WriteJsonFile(dir / "pca_summary.json", pca.SummaryJson());
  embedpca::WriteScoresCsv(graph.child_ids, pca, dir / "pca_scores.csv");
  correlations.WriteCsv(dir / "pca_correlations.csv");
  for (const char* f : {"pca_summary.json", "pca_scores.csv", "pca_correlations.csv"}) rec.Output(dir / f);
  rec.Finish(ManifestPath(c, "embed"), &access);
}

void StageReport(const RunConfig& c) {
  std::vector<std::string> stages = {"synth", "prep", "split", "train", "eval", "gap",
                                     "nested", "disagg", "agree", "sweep"};
  if (fs::exists(ManifestPath(c, "tune"))) stages.insert(stages.begin() + 3, "tune");
  if (HasModel(c, "gnn")) stages.push_back("embed");
  Json files = Json::array();
  for (const auto& s : stages) {
    const Json m = RequireStage(c, s);
    for (const auto& f : m.at("files")) {
      Json entry = f;
      entry["stage"] = s;
      if (s == "synth") entry["path"] = "registry/" + f.at("path").get<std::string>();
      files.push_back(std::move(entry));
    }
  }
  Json config = c.doc();
  config.erase("registry_dir");
  config.erase("out_dir");
  const std::string run = c.run_name();
  Json products{{"summary_table", "registry/summary_table.csv"},
                {"pooled_metrics", "eval/eval_" + run + ".csv"},
                {"pooled_gaps", "gap/gap_" + run + ".csv"},
                {"nested_contexts", "nested/nested.csv"},
                {"disaggregation", "disagg/"},
                {"agreement", "agree/agreement.csv"},
                {"threshold_sweep", "sweep/threshold_sweep.csv"},
                {"auc_gaps", "gap/gap_" + run + "_auc.csv"}};
  if (HasModel(c, "gnn")) products["embedding_correlations"] = "embed/pca_correlations.csv";
  const Json manifest{{"run", run}, {"seeds", c.Seeds()}, {"config", config}, {"stages", stages},
                      {"products", products}, {"files", files}};
  const fs::path out = c.out_dir() / "report" / "manifest.json";
  fs::create_directories(out.parent_path());
  WriteJsonFile(out, manifest);
  Log("report: " + std::to_string(files.size()) + " files in " + out.generic_string());
}

}  // namespace

const std::vector<size_t>& SplitAccess::TrainRows() {
  train_read_ = true;
  return spec_.train;
}

const std::vector<size_t>& SplitAccess::TestIndices() {
  test_indices_read_ = true;
  return spec_.test;
}

std::vector<int> SplitAccess::MaskedLabels(const std::vector<int>& labels) {
  train_read_ = true;
  std::vector<int> out(labels.size(), 0);
  for (size_t r : spec_.train) out.at(r) = labels.at(r);
  return out;
}

const std::vector<size_t>& SplitAccess::TestRowsForEvaluation() {
  test_indices_read_ = true;
  test_read_ = true;
  return spec_.test;
}

Json SplitAccess::AuditJson(const std::string& stage) const {
  return Json{{"stage", stage},
              {"train_rows_read", train_read_},
              {"test_indices_read", test_indices_read_},
              {"test_rows_read", test_read_}};
}

const std::vector<std::string>& StageNames() {
  static const std::vector<std::string> kNames = {"synth", "prep",   "split",  "tune",  "train", "eval", "gap",
                                                  "nested", "disagg", "agree", "sweep", "embed", "report"};
  return kNames;
}

void SetLogSink(std::function<void(std::string_view)> sink) { Sink() = std::move(sink); }

void RunStage(const RunConfig& config, std::string_view stage) {
  config.Validate();
  if (stage == "synth") StageSynth(config);
  else if (stage == "prep") StagePrep(config);
  else if (stage == "split") StageSplit(config);
  else if (stage == "tune") StageTune(config);
  else if (stage == "train") StageTrain(config);
  else if (stage == "eval") StageEval(config);
  else if (stage == "gap") StageGap(config);
  else if (stage == "nested") StageNested(config);
  else if (stage == "disagg") StageDisagg(config);
  else if (stage == "agree") StageAgree(config);
  else if (stage == "sweep") StageSweep(config);
  else if (stage == "embed") StageEmbed(config);
  else if (stage == "report") StageReport(config);
  else throw ConfigError("unknown command '" + std::string(stage) + "'");
}

void RunAll(const RunConfig& config) {
  for (const auto& s : StageNames()) {
    if (s == "embed" && !HasModel(config, "gnn")) continue;
    RunStage(config, s);
  }
}

}  // namespace predgap::pipeline
