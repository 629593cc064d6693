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

#include <map>

#include "common/error.hpp"
#include "doctest.h"
#include "features/feature_table.hpp"
#include "fixtures.hpp"
#include "pipeline/run_config.hpp"
#include "pipeline/stages.hpp"
#include "pipeline/subgroups.hpp"

using namespace predgap;
using namespace predgap::pipeline;
namespace fs = std::filesystem;

namespace {

Json SmallRun(const fs::path& root, const std::string& out) {
  return Json{{"registry_dir", (root / "data").string()},
              {"out_dir", (root / out).string()},
              {"scenario", {{"preset", "interaction"}, {"n_children", 600}, {"rng_seed", 3}}},
              {"tuning", {{"gbt_budget", 1}, {"gnn_budget", 1}, {"folds", 2}}},
              {"gbt", {{"max_iterations", 50}}},
              {"gnn", {{"max_epochs", 4}}},
              {"bootstrap", {{"n_resamples", 100}}},
              {"min_group_size", 20}};
}

RunConfig Load(const fs::path& root, const Json& doc) {
  const fs::path file = root / "config.json";
  WriteJsonFile(file, doc);
  return RunConfig::Load(file, {});
}

std::map<std::string, std::string> ReportHashes(const RunConfig& c) {
  std::map<std::string, std::string> out;
  const Json m = ReadJsonFile(c.out_dir() / "report" / "manifest.json");
  for (const auto& f : m.at("files")) out[f.at("path").get<std::string>()] = f.at("sha256").get<std::string>();
  out["report/manifest.json"] = Sha256File(c.out_dir() / "report" / "manifest.json");
  return out;
}

struct Quiet {
  Quiet() { SetLogSink([](std::string_view) {}); }
};

}  // namespace

TEST_CASE("run config layering and validation") {
  testing::TempDir dir("cfg");
  RunConfig c = RunConfig::Load(std::nullopt, {"threshold=0.4", "models=linear,gbt", "split.seed=9"});
  CHECK(c.threshold() == 0.4);
  CHECK(c.models() == std::vector<std::string>{"linear", "gbt"});
  CHECK(c.split_seed() == 9);
  CHECK_THROWS_AS(c.Set("no.such.key", "1"), ConfigError);
  CHECK_THROWS_AS(RunConfig::Load(std::nullopt, {"threshold=2"}).Validate(), ConfigError);
  CHECK_THROWS_AS(RunConfig::Load(std::nullopt, {"models=linear,forest"}).Validate(), ConfigError);

  WriteJsonFile(dir / "bad.json", Json{{"threshold", 0.5}, {"bogus", 1}});
  CHECK_THROWS_AS(RunConfig::Load(dir / "bad.json", {}), ConfigError);
  WriteFile(dir / "broken.json", "{ not json");
  CHECK_THROWS_AS(RunConfig::Load(dir / "broken.json", {}), ConfigError);

  // A bare scenario document.
  WriteJsonFile(dir / "scenario.json", Json{{"n_children", 1234}, {"outcome_mode", "interaction"}});
  const RunConfig s = RunConfig::Load(dir / "scenario.json", {});
  CHECK(s.scenario().n_children == 1234);

  CHECK(ScenarioPreset("interaction").outcome_mode == synthpop::OutcomeMode::kInteraction);
  CHECK_THROWS_AS(ScenarioPreset("nope"), ConfigError);
  CHECK(ContextKey(features::ContextSetSpec::Prefix(2)) == "nuclear");
  CHECK(RunConfig{}.subgroups().size() == 17);
}

TEST_CASE("subgroup variables resolve to feature columns") {
  auto sc = ScenarioPreset("linear");
  sc.n_children = 300;
  const auto reg = synthpop::GenerateRegistry(sc);
  const features::RegistryView view(reg);
  const auto raw = features::RawInputColumns(view);
  const auto father = LoadSubgroupVariable(raw, "father_known");
  CHECK(father.values.size() == 300);
  CHECK_THROWS_AS(LoadSubgroupVariable(raw, "shoe_size"), ConfigError);
}

TEST_CASE("split access audit") {
  SplitAccess a(evalgap::MakeSplit(100, 1));
  (void)a.TrainRows();
  Json j = a.AuditJson("tune");
  CHECK(j["train_rows_read"] == true);
  CHECK(j["test_rows_read"] == false);
  const std::vector<int> labels(100, 1);
  const auto masked = a.MaskedLabels(labels);
  int kept = 0;
  for (int v : masked) kept += v;
  CHECK(kept == 80);
  (void)a.TestRowsForEvaluation();
  CHECK(a.AuditJson("eval")["test_rows_read"] == true);
}

TEST_CASE("small end-to-end run: artifacts, audit, determinism, dependencies") {
  Quiet quiet;
  testing::TempDir dir("pipe");
  const RunConfig first = Load(dir.path(), SmallRun(dir.path(), "run1"));
  RunAll(first);

  const Json report = ReadJsonFile(first.out_dir() / "report" / "manifest.json");
  CHECK(report.at("stages").size() == 12);  // every stage but report itself
  for (const auto& f : report.at("files")) {
    const std::string rel = f.at("path").get<std::string>();
    const fs::path p = rel.starts_with("registry/") ? first.registry_dir() / rel.substr(9) : first.out_dir() / rel;
    REQUIRE(fs::exists(p));
    CHECK(Sha256File(p) == f.at("sha256").get<std::string>());
  }

  const CsvTable gaps = ReadCsv(first.out_dir() / "gap" / "gap_main.csv");
  CHECK(gaps.rows.size() == 3);

  // Nothing before eval reads test rows.
  for (const char* stage : {"tune", "train"}) {
    const fs::path audit = first.out_dir() / "audit" / (std::string(stage) + ".json");
    REQUIRE(fs::exists(audit));
    CHECK(ReadJsonFile(audit).at("test_rows_read") == false);
  }
  CHECK(ReadJsonFile(first.out_dir() / "audit" / "eval.json").at("test_rows_read") == true);

  // Same seeds into a fresh directory: byte-identical products.
  const RunConfig second = Load(dir.path(), SmallRun(dir.path(), "run2"));
  for (const auto& stage : StageNames()) {
    if (stage != "synth") RunStage(second, stage);
  }
  CHECK(ReportHashes(first) == ReportHashes(second));

  // Rerunning a stage in place is idempotent.
  const std::string eval_hash = Sha256File(first.out_dir() / "eval" / "eval_main.csv");
  RunStage(first, "eval");
  CHECK(Sha256File(first.out_dir() / "eval" / "eval_main.csv") == eval_hash);

  // A changed upstream artifact is detected downstream.
  WriteFile(first.out_dir() / "split.json", "{}");
  CHECK_THROWS_WITH_AS(RunStage(first, "train"), doctest::Contains("split"), DependencyError);

  // A stage without its inputs names the missing one.
  const RunConfig empty = Load(dir.path(), SmallRun(dir.path(), "run3"));
  CHECK_THROWS_WITH_AS(RunStage(empty, "train"), doctest::Contains("predgap"), DependencyError);
  CHECK_THROWS_AS(RunStage(empty, "nonsense"), ConfigError);
}
