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

// Runs the predgap executable as a user would.

#include <sys/wait.h>

#include <cstdlib>
#include <map>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using predgap::testing::TempDir;

namespace {

int Run(const std::string& args) {
  const std::string cmd = std::string(PREDGAP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> HashTree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = predgap::Sha256File(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("synth twice gives identical registries") {
  TempDir dir("cli_synth");
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(Run("synth -q --preset network --set scenario.n_children=400 -o " + a) == 0);
  REQUIRE(Run("synth -q --preset network --set scenario.n_children=400 -o " + b) == 0);
  const auto ha = HashTree(a);
  CHECK(ha.count("manifest.json") == 1);
  CHECK(ha == HashTree(b));
}

TEST_CASE("exit codes") {
  TempDir dir("cli_codes");
  const std::string out = (dir / "run").string();
  const std::string reg = (dir / "data").string();
  CHECK(Run("--help") == 0);
  CHECK(Run("train -q -o " + out + " --registry " + reg) == 3);
  CHECK(Run("eval -q --set bogus.key=1 -o " + out) == 2);
  predgap::WriteFile(dir / "bad.json", "{\"threshold\": 7}");
  CHECK(Run("split -q -c " + (dir / "bad.json").string() + " -o " + out) == 2);
  CHECK(Run("synth -q --preset unknown -o " + reg) == 2);
  CHECK(Run("definitely-not-a-command") != 0);
}

TEST_CASE("gap over three models writes three pooled rows") {
  TempDir dir("cli_gap");
  const std::string common = " -q -o " + (dir / "run").string() + " --registry " + (dir / "data").string() +
                             " --set scenario.n_children=500 --set gnn.max_epochs=4 --set gbt.max_iterations=50"
                             " --set tuning.folds=2 --budget 1 --resamples 100";
  REQUIRE(Run("synth -q --set scenario.n_children=500 -o " + (dir / "data").string()) == 0);
  for (const char* stage : {"prep", "split", "tune", "train", "eval"}) {
    CAPTURE(stage);
    REQUIRE(Run(std::string(stage) + common) == 0);
  }
  REQUIRE(Run("gap --models linear,gbt,gnn" + common) == 0);
  const predgap::CsvTable gaps = predgap::ReadCsv(dir / "run" / "gap" / "gap_main.csv");
  CHECK(gaps.rows.size() == 3);
}
